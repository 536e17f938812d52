"""Independent reference computations used by the tests.

Nothing here imports the package: the cutoff profile and its transform are
re-derived from their definitions so that agreement is a genuine cross-check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import j0, j1


def smoothstep_profile(r):
    """psi(r): 1 on [0, 3/4], 0 on [1, inf), e^{-1/x} smoothstep in between."""
    r = np.asarray(r, dtype=float)
    t = 4.0 * r - 3.0
    out = np.where(r <= 0.75, 1.0, 0.0)
    mid = (r > 0.75) & (r < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / (1.0 - tm))
    b = np.exp(-1.0 / tm)
    out[mid] = a / (a + b)
    return out


def _transition_rule(panels: int = 40, order: int = 400):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.75, 1.0, panels + 1)
    r = np.concatenate([(a + b) / 2 + (b - a) / 2 * x for a, b in zip(edges, edges[1:])])
    wt = np.concatenate([(b - a) / 2 * w for a, b in zip(edges, edges[1:])])
    return r, wt


def kernel_radial(rho, panels: int = 40, order: int = 400):
    """Phi(|x|) = (2 pi)^{-2} int chi(xi) e^{i x.xi} dxi as a Hankel transform.

    The plateau part integrates in closed form: int_0^{3/4} J0(r rho) r dr = (3/4) J1(3 rho / 4) / rho.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    r, w = _transition_rule(panels, order)
    f = smoothstep_profile(r) * r * w
    out = np.empty_like(rho)
    for i in range(0, rho.size, 256):
        p = rho[i : i + 256]
        safe = np.where(p > 0, p, 1.0)
        inner = np.where(p > 0, 0.75 * j1(0.75 * p) / safe, 0.75**2 / 2)
        out[i : i + 256] = (inner + j0(np.outer(p, r)) @ f) / (2 * math.pi)
    return out


def chi_integral():
    r, w = _transition_rule()
    return 2 * math.pi * (0.75**2 / 2 + float((smoothstep_profile(r) * r * w).sum()))


def box_l1_radial(a: float, h: float = 2e-3, order: int = 400):
    """int over the square [-a, a]^2 of |Phi| using radial symmetry.

    The circle of radius rho meets the box in an arc of length 2 pi rho for
    rho <= a and 2 pi rho - 8 rho arccos(a / rho) for a < rho < a sqrt 2.
    """
    rho = np.arange(h / 2, a * math.sqrt(2), h)
    arc = 2 * math.pi * rho
    out = rho > a
    arc[out] -= 8 * rho[out] * np.arccos(a / rho[out])
    return float((np.abs(kernel_radial(rho, order=order)) * arc).sum() * h)


def _alpha_hat(pts, s, theta, k_max, delta, rho):
    """Sum of weighted cutoff bumps: the low one near xi^{-1} plus one per shell 1..k_max."""
    e = np.array([math.cos(theta), math.sin(theta)])
    ep = np.array([math.sin(theta), -math.cos(theta)])
    centers = [2.5 * 2.0**-2 * e + delta * ep] + [5.0 * 2.0 ** (j - 2) * e for j in range(1, k_max + 1)]
    radii = [rho] + [1.0] * k_max
    weights = [2.0 ** (s + 1)] + [2.0 ** (-j * (s + 1)) for j in range(1, k_max + 1)]
    out = np.zeros(pts.shape[:-1])
    for c, r, w in zip(centers, radii, weights):
        out += w * smoothstep_profile(np.hypot(pts[..., 0] - c[0], pts[..., 1] - c[1]) / r)
    return out, list(zip(centers, radii, weights))


def projected_convective_at(xi, s, theta, k_max, delta, rho, per_radius=200):
    """Leray projection of the transform of (u0 . grad) u0 at one frequency.

    u0^ = i(-q2, q1) alpha^(q); the transform of a product is (2 pi)^{-2} times the
    convolution.  Midpoint sums over each support ball, which converge fast for the
    smooth compactly supported integrand.
    """
    xi = np.asarray(xi, dtype=float)
    _, balls = _alpha_hat(np.zeros((1, 2)), s, theta, k_max, delta, rho)
    total = np.zeros(2, dtype=complex)
    for c, r, w in balls:
        h = r / per_radius
        n = np.arange(-per_radius, per_radius) + 0.5
        q = np.stack(np.meshgrid(c[0] + n * h, c[1] + n * h, indexing="ij"), axis=-1).reshape(-1, 2)
        q = q[np.hypot(q[:, 0] - c[0], q[:, 1] - c[1]) < r]
        # only this ball's bump at q, so overlapping balls are not double counted
        aq = w * smoothstep_profile(np.hypot(q[:, 0] - c[0], q[:, 1] - c[1]) / r)
        p = xi - q
        ap, _ = _alpha_hat(p, s, theta, k_max, delta, rho)
        uq = 1j * np.stack([-q[:, 1], q[:, 0]], axis=-1) * aq[:, None]
        up = 1j * np.stack([-p[:, 1], p[:, 0]], axis=-1) * ap[:, None]
        # (u . grad) v -> sum_a u_a^(q) i p_a v^(p)
        dot = (uq * (1j * p)).sum(axis=1)
        total += (dot[:, None] * up).sum(axis=0) * h * h
    total /= (2 * math.pi) ** 2
    n2 = xi @ xi
    return total - xi * (xi @ total) / n2


def direct_convolution(a, b, N, L):
    """Torus transform of a product by brute-force pair sums, truncated to the index box."""
    idx = np.fft.fftfreq(N, 1.0 / N).astype(int)
    out = np.zeros((N, N), complex)
    for p in np.argwhere(a != 0):
        for q in np.argwhere(b != 0):
            m = idx[p] + idx[q]
            if np.all(m >= -N // 2) and np.all(m < N // 2):
                out[m[0] % N, m[1] % N] += a[tuple(p)] * b[tuple(q)]
    return out / L**2


def euler_rhs(u_hat, N, L):
    """-P((u.grad)u) from pair sums; u_hat has shape (2, N, N) in FFT order."""
    k = 2 * math.pi / L * np.fft.fftfreq(N, 1.0 / N)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    w = np.zeros_like(u_hat)
    for c in range(2):
        w[c] = direct_convolution(u_hat[0], 1j * k1 * u_hat[c], N, L)
        w[c] += direct_convolution(u_hat[1], 1j * k2 * u_hat[c], N, L)
    kk = k1**2 + k2**2
    kk[0, 0] = 1.0
    d = (k1 * w[0] + k2 * w[1]) / kk
    return -np.stack([w[0] - k1 * d, w[1] - k2 * d])
