"""Pure-numpy quantization kernels with the same contract as ``_ckernels``."""
import numpy as np


def encode(boundaries, x):
    # side="left" counts boundaries strictly below x: cells are (p_{k-1}, p_k]
    return np.searchsorted(boundaries, x, side="left").astype(np.intp)


def quantize(boundaries, table, x):
    return np.asarray(table)[encode(boundaries, x)]


def cell_counts(boundaries, x):
    return np.bincount(encode(boundaries, x), minlength=len(boundaries) + 1).astype(np.int64)


def error_sums(a, b):
    e2 = (np.asarray(a) - np.asarray(b)) ** 2
    return float(np.sum(e2)), float(np.sum(e2 * e2))


def table_error_sums(target, boundaries, table, x):
    return error_sums(target, quantize(boundaries, table, x))
