"""Backend kernels for the fixed-step implicit RK driver.

Two implementations of the same step loop:

* ``run_numpy``: plain Python/NumPy, always available, used as the
  reference and as the fallback when the right-hand side cannot be JIT
  compiled.
* ``run_numba``: an ``@njit`` kernel fed JIT-compiled rhs/jacobian
  callables. Same algorithm, same operation order.

KEEP THE TWO PATHS IN LOCKSTEP. Every floating-point operation is written
so both backends perform the same multiplications and additions in the
same order (e.g. ``h * (A[i, j] * J[p, q])``, sums reduced sequentially
over stage index before scaling by h). Statistics counters must agree
exactly between backends; trajectories agree to roundoff introduced by
the underlying libm only.

One step solves the stage system with simplified Newton: the Jacobian is
evaluated once per step at (t, y), M = I - h (A kron J) is formed and
inverted once, the stage derivatives start at w_i = f(t, y), and each
iteration evaluates the s stage residuals and applies M^{-1}. The
iteration count is the number of *updates* applied; a step that passes
the residual check immediately contributes zero. Function evaluation
cost per step is 1 + s * (updates + 1), plus dim evaluations when the
Jacobian is finite-difference.

Error codes returned by the runners: 0 success, 1 Newton failed to
converge within max_iters, 2 non-finite residual.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "newton_stages",
    "run_numpy",
    "run_numba",
    "jit_system",
    "numba_available",
]


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except Exception:
        return False
    return True


# --- numpy reference path ---------------------------------------------------


def _fd_jacobian(rhs, t, y, f0, fd_eps):
    d = y.shape[0]
    J = np.empty((d, d))
    for col in range(d):
        dy = fd_eps * max(1.0, abs(y[col]))
        yp = y.copy()
        yp[col] += dy
        J[:, col] = (rhs(t, yp) - f0) / dy
    return J


def newton_stages(rhs, jac, t, y, h, c, A, tol, max_iters, fd_eps):
    """Solve one step's stage system. NumPy reference implementation.

    Returns (W, fevals, iters, resid, status) with W the (s, dim) stage
    derivative array and status one of the module error codes.
    """
    s = A.shape[0]
    d = y.shape[0]
    f0 = rhs(t, y)
    fevals = 1
    if jac is not None:
        J = jac(t, y)
    else:
        J = _fd_jacobian(rhs, t, y, f0, fd_eps)
        fevals += d
    M = np.eye(s * d) - h * np.kron(A, J)
    Minv = np.linalg.inv(M)
    tol_step = tol * max(1.0, np.max(np.abs(y)), np.max(np.abs(f0)))

    W = np.empty((s, d))
    W[:] = f0
    F = np.empty(s * d)
    iters = 0
    resid = np.inf
    for _ in range(max_iters):
        for i in range(s):
            yi = y + h * (A[i] @ W)
            F[i * d : (i + 1) * d] = rhs(t + c[i] * h, yi) - W[i]
        fevals += s
        resid = float(np.max(np.abs(F)))
        if not np.isfinite(resid):
            return W, fevals, iters, resid, 2
        if resid <= tol_step:
            return W, fevals, iters, resid, 0
        W += (Minv @ F).reshape(s, d)
        iters += 1
    return W, fevals, iters, resid, 1


def run_numpy(rhs, jac, y0, t0, h, n_steps, seg_idx, cs, As, bs, tol, max_iters, fd_eps):
    """Reference step loop. Returns (ys, fevals, iters, max_resid, code, step).

    ``jac`` is None for finite differences. ``max_resid`` is the largest
    accepted step residual, or the failing residual when code != 0.
    """
    d = y0.shape[0]
    ys = np.empty((n_steps + 1, d))
    ys[0] = y0
    y = y0.copy()
    fevals = 0
    iters_total = 0
    max_resid = 0.0
    for step in range(n_steps):
        t = t0 + step * h
        k = seg_idx[step]
        W, fe, it, resid, status = newton_stages(
            rhs, jac, t, y, h, cs[k], As[k], tol, max_iters, fd_eps
        )
        fevals += fe
        iters_total += it
        if status != 0:
            return ys, fevals, iters_total, resid, status, step
        if resid > max_resid:
            max_resid = resid
        y = y + h * (bs[k] @ W)
        ys[step + 1] = y
    return ys, fevals, iters_total, max_resid, 0, -1


# --- numba path ---------------------------------------------------------

_JITTED: dict = {}  # python function -> numba dispatcher (strong refs, keeps ids valid)
_KERNEL = None
_DUMMY_JAC = None


def _dummy_jac_py(t, y):  # pragma: no cover - compiled, never called
    return np.empty((0, 0))


def jit_system(rhs, jac, t_probe, y_probe):
    """JIT-compile the system callables and smoke-test the rhs.

    Raises whatever numba raises when the callable cannot be compiled
    (TypingError and friends); the caller decides whether to fall back.
    Returns (rhs_dispatcher, jac_dispatcher_or_dummy).
    """
    import numba

    global _DUMMY_JAC
    rhs_d = _JITTED.get(rhs)
    if rhs_d is None:
        rhs_d = numba.njit(rhs)
        out = rhs_d(t_probe, y_probe.copy())
        out = np.asarray(out)
        if out.shape != y_probe.shape:
            raise TypeError(
                f"rhs returned shape {out.shape}, expected {y_probe.shape}"
            )
        _JITTED[rhs] = rhs_d
    if jac is None:
        if _DUMMY_JAC is None:
            _DUMMY_JAC = numba.njit(_dummy_jac_py)
            _DUMMY_JAC(t_probe, y_probe.copy())
        return rhs_d, _DUMMY_JAC
    jac_d = _JITTED.get(jac)
    if jac_d is None:
        jac_d = numba.njit(jac)
        J = np.asarray(jac_d(t_probe, y_probe.copy()))
        d = y_probe.shape[0]
        if J.shape != (d, d):
            raise TypeError(f"jacobian returned shape {J.shape}, expected {(d, d)}")
        _JITTED[jac] = jac_d
    return rhs_d, jac_d


def _build_kernel():
    import numba

    @numba.njit(fastmath=False)
    def kernel(rhs, jac, has_jac, y0, t0, h, n_steps, seg_idx, cs, As, bs, tol, max_iters, fd_eps):
        s = bs.shape[1]
        d = y0.shape[0]
        sd = s * d
        ys = np.empty((n_steps + 1, d))
        for p in range(d):
            ys[0, p] = y0[p]
        y = y0.copy()
        W = np.empty((s, d))
        F = np.empty(sd)
        M = np.empty((sd, sd))
        yi = np.empty(d)
        fevals = 0
        iters_total = 0
        max_resid = 0.0
        err_code = 0
        err_step = -1
        fail_resid = 0.0
        for step in range(n_steps):
            t = t0 + step * h
            k = seg_idx[step]
            A = As[k]
            bvec = bs[k]
            cvec = cs[k]
            f0 = rhs(t, y)
            fevals += 1
            if has_jac:
                J = jac(t, y)
            else:
                J = np.empty((d, d))
                for col in range(d):
                    dy = fd_eps * max(1.0, abs(y[col]))
                    yp = y.copy()
                    yp[col] += dy
                    fp = rhs(t, yp)
                    fevals += 1
                    for row in range(d):
                        J[row, col] = (fp[row] - f0[row]) / dy
            for i in range(s):
                for j in range(s):
                    for p in range(d):
                        for q in range(d):
                            base = 1.0 if (i == j and p == q) else 0.0
                            M[i * d + p, j * d + q] = base - h * (A[i, j] * J[p, q])
            Minv = np.linalg.inv(M)
            ymax = 0.0
            fmax = 0.0
            for p in range(d):
                ay = abs(y[p])
                if ay > ymax:
                    ymax = ay
                af = abs(f0[p])
                if af > fmax:
                    fmax = af
            tol_step = tol * max(1.0, ymax, fmax)
            for i in range(s):
                for p in range(d):
                    W[i, p] = f0[p]
            converged = False
            resid = np.inf
            for _ in range(max_iters):
                for i in range(s):
                    for p in range(d):
                        acc = 0.0
                        for j in range(s):
                            acc += A[i, j] * W[j, p]
                        yi[p] = y[p] + h * acc
                    fi = rhs(t + cvec[i] * h, yi)
                    fevals += 1
                    for p in range(d):
                        F[i * d + p] = fi[p] - W[i, p]
                resid = 0.0
                for q in range(sd):
                    aq = abs(F[q])
                    if aq > resid:
                        resid = aq
                if not np.isfinite(resid):
                    err_code = 2
                    break
                if resid <= tol_step:
                    converged = True
                    break
                dW = Minv @ F
                for i in range(s):
                    for p in range(d):
                        W[i, p] += dW[i * d + p]
                iters_total += 1
            if err_code == 0 and not converged:
                err_code = 1
            if err_code != 0:
                err_step = step
                fail_resid = resid
                break
            if resid > max_resid:
                max_resid = resid
            for p in range(d):
                acc = 0.0
                for i in range(s):
                    acc += bvec[i] * W[i, p]
                y[p] = y[p] + h * acc
            for p in range(d):
                ys[step + 1, p] = y[p]
        if err_code != 0:
            max_resid = fail_resid
        return ys, fevals, iters_total, max_resid, err_code, err_step

    return kernel


def run_numba(rhs_d, jac_d, has_jac, y0, t0, h, n_steps, seg_idx, cs, As, bs, tol, max_iters, fd_eps):
    """JIT step loop. Same contract as ``run_numpy``; callables must be
    numba dispatchers from ``jit_system``."""
    global _KERNEL
    if _KERNEL is None:
        _KERNEL = _build_kernel()
    return _KERNEL(
        rhs_d, jac_d, has_jac, y0, t0, h, n_steps, seg_idx,
        cs, As, bs, tol, max_iters, fd_eps,
    )
