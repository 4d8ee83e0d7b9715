"""Compiled first-order upwind sweep kernel, batched over right-hand sides."""
import numba
import numpy as np

# avoid probing an outdated TBB at first parallel launch
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "workqueue"


@numba.njit(cache=True, parallel=True)
def sweep_batch(cos, sin, w, dx, dy, sigma_t, q, bx, by, phi, outx, outy, psi, store_psi):
    """March every ordinate across the grid for each right-hand side r.

    Per cell: (|c|/dx + |s|/dy + sigma_t) f = q + |c|/dx f_upx + |s|/dy f_upy,
    where upwind neighbours outside the box are the inflow values bx[r, j, iy]
    (x-side) and by[r, j, ix] (y-side). Accumulates phi = sum_j w_j f_j and the
    downwind boundary traces outx/outy. Right-hand sides are independent, so
    results do not depend on the thread count.
    """
    nrhs = q.shape[0]
    nt = cos.shape[0]
    nx, ny = sigma_t.shape
    for r in numba.prange(nrhs):
        f = np.empty((nx, ny))
        for ix in range(nx):
            for iy in range(ny):
                phi[r, ix, iy] = 0.0
        for j in range(nt):
            c = cos[j]
            s = sin[j]
            a = abs(c) / dx
            b = abs(s) / dy
            for ky in range(ny):
                iy = ky if s > 0 else ny - 1 - ky
                for kx in range(nx):
                    ix = kx if c > 0 else nx - 1 - kx
                    if kx == 0:
                        upx = bx[r, j, iy]
                    else:
                        upx = f[ix - 1, iy] if c > 0 else f[ix + 1, iy]
                    if ky == 0:
                        upy = by[r, j, ix]
                    else:
                        upy = f[ix, iy - 1] if s > 0 else f[ix, iy + 1]
                    val = (q[r, ix, iy] + a * upx + b * upy) / (a + b + sigma_t[ix, iy])
                    f[ix, iy] = val
                    phi[r, ix, iy] += w[j] * val
            xo = nx - 1 if c > 0 else 0
            yo = ny - 1 if s > 0 else 0
            for iy in range(ny):
                outx[r, j, iy] = f[xo, iy]
            for ix in range(nx):
                outy[r, j, ix] = f[ix, yo]
            if store_psi:
                for ix in range(nx):
                    for iy in range(ny):
                        psi[r, j, ix, iy] = f[ix, iy]
