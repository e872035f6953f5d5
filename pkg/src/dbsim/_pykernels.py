"""Pure numpy implementations of the bulk channel kernels.

Used when the compiled ``_ckernels`` extension is unavailable. Signatures
match the compiled module exactly; ``params`` is
``ChannelParams.as_tuple()``.
"""
import numpy as np


def link_terms(r2, params):
    """LoS probability and full-band LoS/NLoS received powers for squared ground distances."""
    h2, h, alpha, beta, lin_los, hg_los, lin_nlos, hg_nlos, _, _ = params
    r2 = np.asarray(r2, dtype=np.float64)
    omega = np.degrees(np.arctan2(h, np.sqrt(r2)))
    p_los = 1.0 / (1.0 + alpha * np.exp(-beta * (omega - alpha)))
    ln_d2 = np.log(np.maximum(r2 + h2, 1.0))
    return p_los, lin_los * np.exp(-hg_los * ln_d2), lin_nlos * np.exp(-hg_nlos * ln_d2)


def expected_power(r2, params):
    p, s_l, s_n = link_terms(r2, params)
    return p * s_l + (1.0 - p) * s_n


def interference(ux, uy, userv, dx, dy, dtx, params):
    """Interference at each user for each row of drone positions.

    ``dx``/``dy`` have shape ``(K, N)``; users ``(M,)``. Drone ``j`` counts
    toward user ``m`` when it transmits, does not serve ``m``, and lies within
    the interference range. Returns ``(K, M)``.
    """
    kappa2 = params[8]
    ux = np.asarray(ux, dtype=np.float64)
    uy = np.asarray(uy, dtype=np.float64)
    dx = np.atleast_2d(np.asarray(dx, dtype=np.float64))
    dy = np.atleast_2d(np.asarray(dy, dtype=np.float64))
    K, N = dx.shape
    M = ux.shape[0]
    out = np.zeros((K, M))
    if M == 0 or N == 0:
        return out
    ddx = ux[None, :, None] - dx[:, None, :]
    ddy = uy[None, :, None] - dy[:, None, :]
    r2 = ddx * ddx + ddy * ddy
    mask = (r2 <= kappa2) & np.asarray(dtx, dtype=bool)[None, None, :]
    mask &= np.arange(N)[None, None, :] != np.asarray(userv)[None, :, None]
    pw = np.where(mask, expected_power(r2, params), 0.0)
    # sequential accumulation in drone order, same as the compiled loop
    for j in range(N):
        out += pw[:, :, j]
    return out


def leakage(cx, cy, rowid, ux, uy, ucell, nbr, params):
    """Expected power candidate drone positions leak onto neighbouring cells' users.

    ``cx``/``cy`` have shape ``(R, S)``: S positions for each of R drones whose
    ids are ``rowid``. User ``m`` counts for row ``r`` when
    ``nbr[rowid[r], ucell[m]]`` is set and ``ucell[m] != rowid[r]``.
    Returns ``(R, S)``.
    """
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    N, S = cx.shape
    out = np.zeros((N, S))
    ux = np.asarray(ux, dtype=np.float64)
    uy = np.asarray(uy, dtype=np.float64)
    ucell = np.asarray(ucell)
    nbr = np.asarray(nbr, dtype=bool)
    for r in range(N):
        n = rowid[r]
        sel = nbr[n, ucell] & (ucell != n)
        if not sel.any():
            continue
        ddx = cx[r][:, None] - ux[sel][None, :]
        ddy = cy[r][:, None] - uy[sel][None, :]
        pw = expected_power(ddx * ddx + ddy * ddy, params)
        acc = np.zeros(S)
        for m in range(pw.shape[1]):
            acc += pw[:, m]
        out[r] = acc
    return out


def user_se(p_los, s_los, s_nlos, interf, noise):
    p_los = np.asarray(p_los, dtype=np.float64)
    denom = np.asarray(interf, dtype=np.float64) + noise
    return p_los * np.log2(1.0 + s_los / denom) + (1.0 - p_los) * np.log2(1.0 + s_nlos / denom)
