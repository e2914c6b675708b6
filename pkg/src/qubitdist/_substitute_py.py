"""Pure-Python substitution kernel.

Reference implementation of the creation-operator substitution used by
:func:`qubitdist.fock.apply_transform`. The compiled module
``qubitdist._substitute`` exposes the same ``substitute`` function and is
preferred when it imports.
"""
from itertools import product
from math import factorial, sqrt

_SQRT_FACT = [sqrt(factorial(n)) for n in range(33)]


def _mult_factor(key):
    """sqrt(prod n_k!) for a sorted multiset key."""
    f = 1.0
    run = 1
    for i in range(1, len(key)):
        if key[i] == key[i - 1]:
            run += 1
        else:
            if run > 1:
                f *= _SQRT_FACT[run]
            run = 1
    if run > 1:
        f *= _SQRT_FACT[run]
    return f


def substitute(terms, columns, relabel, prune):
    """Expand every term through a linear mode map.

    Parameters
    ----------
    terms : dict
        ``{key: amplitude}`` where ``key`` is a sorted tuple of global mode
        indices, one entry per photon.
    columns : dict
        ``{input_mode: ((output_mode, coefficient), ...)}``; modes absent from
        the dict are left untouched.
    relabel : sequence of int or None
        Final renaming applied to every output mode index.
    prune : float
        Amplitudes with modulus below this are dropped.

    Returns
    -------
    dict
        The transformed ``{key: amplitude}`` mapping.
    """
    out = {}
    get = out.get
    for key, amp in terms.items():
        fixed = []
        choices = []
        for m in key:
            col = columns.get(m)
            if col is None:
                fixed.append(m)
            else:
                choices.append(col)
        scale = amp / _mult_factor(key)
        if not choices:
            combos = ((),)
        else:
            combos = product(*choices)
        for combo in combos:
            c = scale
            modes = list(fixed)
            for m, coef in combo:
                c *= coef
                modes.append(m)
            if relabel is not None:
                modes = [relabel[m] for m in modes]
            modes.sort()
            k = tuple(modes)
            c *= _mult_factor(k)
            out[k] = get(k, 0j) + c
    return {k: v for k, v in out.items() if abs(v) >= prune}
