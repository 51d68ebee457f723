"""Grid-refinement study of the spin residual against the continuum operator.

For u(x) = (cos x, sin x, 0) and f(x) = 1.5 + 0.5 cos x on a periodic grid, the
continuum value is f u'' + f' u'. The script prints the max error and the
ratio between successive grids (close to 4 for a second-order stencil).
"""
import numpy as np

from fmorph.spin import SpinField, residual


def error(n):
    h = 2 * np.pi / n
    x = np.arange(n) * h
    f = 1.5 + 0.5 * np.cos(x)
    u = np.stack([np.cos(x), np.sin(x), 0 * x], axis=-1)
    du = np.stack([-np.sin(x), np.cos(x), 0 * x], axis=-1)
    exact = -f[:, None] * u - 0.5 * np.sin(x)[:, None] * du
    return float(np.abs(residual(SpinField(u, f, (h,), "periodic")) - exact).max())


def main():
    prev = None
    for n in (8, 16, 32, 64, 128, 256):
        e = error(n)
        ratio = "" if prev is None else f"  ratio {prev / e:.3f}"
        print(f"n = {n:>4}  max error {e:.3e}{ratio}")
        prev = e


if __name__ == "__main__":
    main()
