"""Central finite-difference helpers shared by the derivative fallbacks."""

from __future__ import annotations

from typing import Callable

import numpy as np


def fd_gradient(fun: Callable, v: np.ndarray, step: float) -> np.ndarray:
    """Central differences of a scalar function, step scaled by 1 + |coordinate|."""
    grad = np.empty(v.shape[0])
    for i in range(v.shape[0]):
        h = step * (1.0 + abs(v[i]))
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        grad[i] = (fun(vp) - fun(vm)) / (2.0 * h)
    return grad


def fd_jacobian(fun: Callable, v: np.ndarray, step: float) -> np.ndarray:
    """Central differences of a vector function; rows index outputs."""
    cols = []
    for i in range(v.shape[0]):
        h = step * (1.0 + abs(v[i]))
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        cols.append((np.asarray(fun(vp), dtype=float) - np.asarray(fun(vm), dtype=float)) / (2.0 * h))
    if not cols:
        return np.zeros((np.asarray(fun(v)).shape[0], 0))
    return np.column_stack(cols)


def fd_hessian_from_gradient(grad_fun: Callable, v: np.ndarray, step: float) -> np.ndarray:
    """Hessian as central differences of a (possibly analytic) gradient; symmetrized."""
    h = fd_jacobian(grad_fun, v, step)
    return 0.5 * (h + h.T)


def fd_hessian_direct(fun: Callable, v: np.ndarray, step: float) -> np.ndarray:
    """Hessian by direct second differences of a scalar function.

    Uses a step of sqrt(step) scaling so the second-difference roundoff noise
    stays well below typical rank tolerances.
    """
    m = v.shape[0]
    w = np.empty((m, m))
    step2 = np.sqrt(step)
    hs = step2 * (1.0 + np.abs(v))
    f0 = fun(v)
    for a in range(m):
        vp, vm = v.copy(), v.copy()
        vp[a] += hs[a]
        vm[a] -= hs[a]
        w[a, a] = (fun(vp) - 2.0 * f0 + fun(vm)) / hs[a] ** 2
        for b in range(a + 1, m):
            vpp, vpm, vmp, vmm = v.copy(), v.copy(), v.copy(), v.copy()
            vpp[a] += hs[a]
            vpp[b] += hs[b]
            vpm[a] += hs[a]
            vpm[b] -= hs[b]
            vmp[a] -= hs[a]
            vmp[b] += hs[b]
            vmm[a] -= hs[a]
            vmm[b] -= hs[b]
            w[a, b] = w[b, a] = (fun(vpp) - fun(vpm) - fun(vmp) + fun(vmm)) / (4.0 * hs[a] * hs[b])
    return w
