"""Independent reference computations used by the tests."""
import numpy as np


def szego_boundary_map(z, dz, a=0j):
    """Boundary values of the Riemann map onto the unit disk (f(a)=0, f'(a)>0)
    for a smooth closed curve sampled uniformly in its parameter.

    Solves the Kerzman–Stein integral equation for the Szegő kernel by the
    trapezoid Nyström method and returns f = -i T S / conj(S) on the curve.
    """
    n = z.size
    speed = np.abs(dz)
    T = dz / speed
    ds = speed * 2 * np.pi / n
    with np.errstate(divide="ignore", invalid="ignore"):
        H = T[None, :] / (2j * np.pi * (z[None, :] - z[:, None]))
    np.fill_diagonal(H, 0.0)
    A = H.conj().T - H
    rhs = np.conj(T / (2j * np.pi * (z - a)))
    S = np.linalg.solve(np.eye(n) + A * ds[None, :], rhs)
    return -1j * T * S / np.conj(S)
