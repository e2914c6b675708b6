# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled substitution kernel; same contract as ``_substitute_py.substitute``."""
from libc.math cimport sqrt

cdef enum:
    MAXP = 32

cdef double _SQRT_FACT[MAXP + 1]
cdef int _i
cdef double _f = 1.0
_SQRT_FACT[0] = 1.0
for _i in range(1, MAXP + 1):
    _f *= _i
    _SQRT_FACT[_i] = sqrt(_f)


cdef inline double _mult_factor(long *modes, int n) noexcept:
    cdef double f = 1.0
    cdef int run = 1
    cdef int i
    for i in range(1, n):
        if modes[i] == modes[i - 1]:
            run += 1
        else:
            if run > 1:
                f *= _SQRT_FACT[run]
            run = 1
    if run > 1:
        f *= _SQRT_FACT[run]
    return f


cdef inline void _isort(long *a, int n) noexcept:
    cdef int i, j
    cdef long v
    for i in range(1, n):
        v = a[i]
        j = i - 1
        while j >= 0 and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


def substitute(dict terms, dict columns, relabel, double prune):
    cdef long maxmode = -1
    cdef long m
    for m in columns:
        if m > maxmode:
            maxmode = m

    cdef long ncol = maxmode + 1
    cdef list ptr = [-1] * ncol
    cdef list cnt = [0] * ncol
    out_idx = []
    out_coef = []
    for m, col in columns.items():
        ptr[m] = len(out_idx)
        cnt[m] = len(col)
        for tgt, coef in col:
            out_idx.append(tgt)
            out_coef.append(complex(coef))

    cdef long nentries = len(out_idx)
    cdef long[::1] c_ptr
    cdef long[::1] c_cnt
    cdef long[::1] c_idx
    cdef double complex[::1] c_val
    import numpy as np
    c_ptr = np.asarray(ptr, dtype=np.int64) if ncol else np.zeros(1, dtype=np.int64)
    c_cnt = np.asarray(cnt, dtype=np.int64) if ncol else np.zeros(1, dtype=np.int64)
    c_idx = np.asarray(out_idx, dtype=np.int64) if nentries else np.zeros(1, dtype=np.int64)
    c_val = np.asarray(out_coef, dtype=np.complex128) if nentries else np.zeros(1, dtype=np.complex128)

    cdef bint has_relabel = relabel is not None
    cdef long[::1] c_rel
    if has_relabel:
        c_rel = np.asarray(relabel, dtype=np.int64)
    else:
        c_rel = np.zeros(1, dtype=np.int64)

    cdef dict out = {}
    cdef long fixed[MAXP]
    cdef long var_start[MAXP]
    cdef long var_len[MAXP]
    cdef long counter[MAXP]
    cdef long buf[MAXP]
    cdef int nfix, nvar, n, i, j, pos
    cdef double complex amp, c, scale
    cdef tuple key
    cdef object k
    cdef bint done

    for key, pyamp in terms.items():
        n = len(key)
        if n > MAXP:
            raise ValueError("too many photons for compiled kernel")
        nfix = 0
        nvar = 0
        for i in range(n):
            m = key[i]
            buf[i] = m
            if m < ncol and c_ptr[m] >= 0:
                var_start[nvar] = c_ptr[m]
                var_len[nvar] = c_cnt[m]
                counter[nvar] = 0
                nvar += 1
            else:
                fixed[nfix] = m
                nfix += 1
        amp = pyamp
        scale = amp / _mult_factor(buf, n)

        done = False
        while not done:
            c = scale
            for i in range(nfix):
                buf[i] = fixed[i]
            for j in range(nvar):
                pos = var_start[j] + counter[j]
                c = c * c_val[pos]
                buf[nfix + j] = c_idx[pos]
            if has_relabel:
                for i in range(n):
                    buf[i] = c_rel[buf[i]]
            _isort(buf, n)
            c = c * _mult_factor(buf, n)
            k = tuple([buf[i] for i in range(n)])
            prev = out.get(k)
            if prev is None:
                out[k] = c
            else:
                out[k] = prev + c
            # mixed-radix increment
            j = nvar - 1
            while j >= 0:
                counter[j] += 1
                if counter[j] < var_len[j]:
                    break
                counter[j] = 0
                j -= 1
            if j < 0:
                done = True

    return {kk: v for kk, v in out.items() if abs(v) >= prune}
