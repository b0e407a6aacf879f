"""Regenerate ``mstld.wavelets.DMEY_TAPS``.

Starts from the usual 62-tap discrete Meyer low-pass (as shipped by
PyWavelets) and Gauss-Newton-projects it onto the set of exactly orthonormal
filters with a zero at pi:

    sum_k h[k] h[k + 2m] = delta[m]   for m = 0..30
    sum_k (-1)^k h[k]    = 0

Needs ``pip install pywavelets``; the package itself does not.
"""
import numpy as np
import pywt


def constraints(h):
    L = h.size
    r = [np.dot(h[:L - 2 * m], h[2 * m:]) - (m == 0) for m in range(L // 2)]
    r.append(np.sum(h * (-1.0) ** np.arange(L)))
    return np.array(r, dtype=float)


def jacobian(h):
    L = h.size
    J = np.zeros((L // 2 + 1, L))
    for m in range(L // 2):
        J[m, :L - 2 * m] += h[2 * m:]
        J[m, 2 * m:] += h[:L - 2 * m]
    J[-1] = (-1.0) ** np.arange(L)
    return J


def main():
    h0 = np.array(pywt.Wavelet("dmey").dec_lo, dtype=float)
    h = h0.copy()
    for _ in range(50):
        r = constraints(h)
        if np.abs(r).max() < 1e-16:
            break
        h = h - np.linalg.lstsq(jacobian(h), r, rcond=None)[0]
    print(f"# max constraint violation {np.abs(constraints(h)).max():.2e}, "
          f"max tap change {np.abs(h - h0).max():.4f}")
    for i in range(0, h.size, 3):
        print("    " + " ".join(f"{float(v)!r}," for v in h[i:i + 3]))


if __name__ == "__main__":
    main()
