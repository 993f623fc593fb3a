"""Reference implementations written without the package.

Dense Kronecker-product spin chains with scipy's expm, Floquet data from
numpy.linalg.eig and a direct spectral QFI. Slow, small and obvious.
"""

import numpy as np
from scipy.linalg import expm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def site_op(single, site, N):
    out = np.ones((1, 1), dtype=complex)
    for j in range(N):
        out = np.kron(out, single if j == site else np.eye(2))
    return out


def ring_hamiltonian(N, J, h):
    H = np.zeros((2 ** N, 2 ** N), dtype=complex)
    for i in range(N):
        H -= J * site_op(SX, i, N) @ site_op(SX, (i + 1) % N, N)
        H -= h * site_op(SZ, i, N)
    return H


def period_unitary(N, J, h0, h1, tau):
    """Kick after the static segment; the chain is generated by H/2."""
    Sz = sum(site_op(SZ, i, N) for i in range(N))
    return expm(0.5j * h1 * Sz) @ expm(-0.5j * tau * ring_hamiltonian(N, J, h0))


def polarized(N):
    psi = np.zeros(2 ** N, dtype=complex)
    psi[0] = 1
    return psi


def reduced(psi, N, L):
    m = psi.reshape(2 ** L, 2 ** (N - L))
    return m @ m.conj().T


def spectral_qfi(rho, drho):
    lam, V = np.linalg.eigh(rho)
    total = 0.0
    for r in range(len(lam)):
        for s in range(len(lam)):
            if lam[r] + lam[s] > 1e-12:
                x = V[:, r].conj() @ drho @ V[:, s]
                total += 2 * abs(x) ** 2 / (lam[r] + lam[s])
    return total


def ed_series(N, J, h0, h1, tau, ns, Ls, dh=1e-3):
    """{n: (m_z, {L: F_Q})} from finite-difference reduced states."""
    Us = [period_unitary(N, J, h0, h, tau) for h in (h1 - dh, h1, h1 + dh)]
    Sz = sum(site_op(SZ, i, N) for i in range(N)) / N
    out = {}
    for n in ns:
        psis = [np.linalg.matrix_power(U, n) @ polarized(N) for U in Us]
        mz = float(np.real(psis[1].conj() @ Sz @ psis[1]))
        F = {}
        for L in Ls:
            rm, r0, rp = (reduced(p, N, L) for p in psis)
            F[L] = spectral_qfi(r0, (rp - rm) / (2 * dh))
        out[n] = (mz, F)
    return out


def mode_unitary(J, h0, h1, tau, k):
    mu = np.array([0.0, J * np.sin(k), h0 + J * np.cos(k)])
    Hk = mu[1] * SY + mu[2] * SZ
    return expm(-1j * h1 * SZ) @ expm(-1j * tau * Hk)


def floquet_gap(J, h0, h1, tau, N):
    ks = np.pi * (2 * np.arange(N // 2) + 1) / N
    best = np.inf
    for k in ks:
        w = np.linalg.eigvals(mode_unitary(J, h0, h1, tau, k))
        best = min(best, 2 * abs(np.angle(w[0])) / tau)
    return best


def steady_fss(J, h0, h1, tau, N, Ls, dh=1e-3):
    """Diagonal-ensemble block QFI from the covariance-matrix formula."""
    ks = np.pi * (2 * np.arange(N // 2) + 1) / N
    Lmax = max(Ls)

    def gamma(h):
        occ, anom = np.zeros(len(ks)), np.zeros(len(ks), dtype=complex)
        for i, k in enumerate(ks):
            w, V = np.linalg.eig(mode_unitary(J, h0, h, tau, k))
            V = V / np.linalg.norm(V, axis=0)
            r = V.conj().T @ np.array([1, 0])
            rho = sum(abs(r[a]) ** 2 * np.outer(V[:, a], V[:, a].conj()) for a in range(2))
            occ[i], anom[i] = rho[1, 1].real, rho[1, 0]
        d = np.arange(Lmax)
        c = (2 / N) * np.cos(np.outer(d, ks)) @ occ
        s = (2j / N) * np.sin(np.outer(d, ks)) @ anom
        C = np.array([[c[abs(i - j)] for j in range(Lmax)] for i in range(Lmax)])
        I = np.array([[np.sign(j - i) * s[abs(j - i)] for j in range(Lmax)] for i in range(Lmax)])
        G = np.zeros((2 * Lmax, 2 * Lmax), dtype=complex)
        e = np.eye(Lmax)
        G[0::2, 0::2] = e + 2j * np.imag(C + I)
        G[0::2, 1::2] = 1j * e - 2j * np.real(C - I)
        G[1::2, 0::2] = -1j * e + 2j * np.real(C + I)
        G[1::2, 1::2] = e + 2j * np.imag(C - I)
        return G

    G0, Gm, Gp = gamma(h1), gamma(h1 - dh), gamma(h1 + dh)
    out = {}
    for L in Ls:
        sl = slice(0, 2 * L)
        g, V = np.linalg.eigh(G0[sl, sl] - np.eye(2 * L))
        D = V.conj().T @ ((Gp - Gm)[sl, sl] / (2 * dh)) @ V
        den = 1 - np.outer(g, g)
        m = np.abs(den) > 1e-8
        out[L] = float(0.5 * np.sum(np.abs(D[m]) ** 2 / den[m]))
    return out
