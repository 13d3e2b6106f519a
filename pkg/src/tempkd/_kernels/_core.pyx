# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-batch loss kernels.

These row-wise operations sit on the hot path of every training step, so
each one is fused into a single pass over the batch: tempered softmax,
cross-entropy and its gradient, and the tempered KL objective with its
gradient. Semantics match ``tempkd._kernels._fallback``; inputs are
pre-validated by ``tempkd.numerics``.
"""

from libc.math cimport exp, log
from libc.stdint cimport int64_t

import numpy as np

NAME = "compiled"


def softmax_rows(const double[:, ::1] logits, double temperature):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t c = logits.shape[1]
    out_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, total, v
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        total = 0.0
        for j in range(c):
            v = exp((logits[i, j] - m) / temperature)
            out[i, j] = v
            total += v
        for j in range(c):
            out[i, j] /= total
    return out_arr


def cross_entropy(const double[:, ::1] logits, const int64_t[::1] labels):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t c = logits.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, total, acc = 0.0
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        total = 0.0
        for j in range(c):
            total += exp(logits[i, j] - m)
        acc += m + log(total) - logits[i, labels[i]]
    return acc / n


def cross_entropy_grad(const double[:, ::1] logits, const int64_t[::1] labels):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t c = logits.shape[1]
    out_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, total, v
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        total = 0.0
        for j in range(c):
            v = exp(logits[i, j] - m)
            out[i, j] = v
            total += v
        for j in range(c):
            out[i, j] /= total
        out[i, labels[i]] -= 1.0
        for j in range(c):
            out[i, j] /= n
    return out_arr


def kd_value(const double[:, ::1] teacher_logits,
             const double[:, ::1] student_logits,
             double temperature):
    cdef Py_ssize_t n = teacher_logits.shape[0]
    cdef Py_ssize_t c = teacher_logits.shape[1]
    cdef Py_ssize_t i, j
    cdef double mt, ms, st, ss, log_st, log_ss, lpt, lps, acc = 0.0
    for i in range(n):
        mt = teacher_logits[i, 0]
        ms = student_logits[i, 0]
        for j in range(1, c):
            if teacher_logits[i, j] > mt:
                mt = teacher_logits[i, j]
            if student_logits[i, j] > ms:
                ms = student_logits[i, j]
        st = 0.0
        ss = 0.0
        for j in range(c):
            st += exp((teacher_logits[i, j] - mt) / temperature)
            ss += exp((student_logits[i, j] - ms) / temperature)
        log_st = log(st)
        log_ss = log(ss)
        for j in range(c):
            lpt = (teacher_logits[i, j] - mt) / temperature - log_st
            lps = (student_logits[i, j] - ms) / temperature - log_ss
            acc += exp(lpt) * (lpt - lps)
    cdef double value = temperature * temperature * acc / n
    return value if value > 0.0 else 0.0


def kd_grad(const double[:, ::1] teacher_logits,
            const double[:, ::1] student_logits,
            double temperature):
    cdef Py_ssize_t n = teacher_logits.shape[0]
    cdef Py_ssize_t c = teacher_logits.shape[1]
    out_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double mt, ms, st, ss, pt, ps
    for i in range(n):
        mt = teacher_logits[i, 0]
        ms = student_logits[i, 0]
        for j in range(1, c):
            if teacher_logits[i, j] > mt:
                mt = teacher_logits[i, j]
            if student_logits[i, j] > ms:
                ms = student_logits[i, j]
        st = 0.0
        ss = 0.0
        for j in range(c):
            st += exp((teacher_logits[i, j] - mt) / temperature)
            ss += exp((student_logits[i, j] - ms) / temperature)
        for j in range(c):
            pt = exp((teacher_logits[i, j] - mt) / temperature) / st
            ps = exp((student_logits[i, j] - ms) / temperature) / ss
            out[i, j] = temperature * (ps - pt) / n
    return out_arr
