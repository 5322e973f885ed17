"""The three limit operators and the strange-term sign question.

Solves the low spectrum of the intermediate, strange-term, and Dirichlet
limit problems on the unit-torus strip.  With the + K sign the strange-term
spectrum interpolates monotonically between the intermediate and Dirichlet
spectra; with the literal - K sign the form is unbounded below and every
tangential mode throws one eigenvalue to about -9e14.  The oscillating-
domain experiment (demos/regime_classification.py) adjudicates which sign
the physics selects.

Run:  python demos/limit_spectra.py
"""

import numpy as np

from trihomog.limit1d import LimitBC, solve_limit_spectrum

K = 20.0 * np.pi ** 3     # strange constant of b = 1 + cos(2 pi y)


def main():
    count = 6
    spectra = {
        "intermediate": solve_limit_spectrum(LimitBC("intermediate"),
                                             count=count),
        "strange(+K)": solve_limit_spectrum(
            LimitBC("strange", K=K, flip_sign=True), count=count),
        "dirichlet": solve_limit_spectrum(LimitBC("dirichlet"), count=count),
    }
    print("lowest %d eigenvalues (K = 20 pi^3 = %.6f):\n" % (count, K))
    print("  j   %-18s %-18s %-18s" % tuple(spectra))
    cols = [s.eigenvalues() for s in spectra.values()]
    for j in range(count):
        print("  %d   %-18.10g %-18.10g %-18.10g"
              % (j, cols[0][j], cols[1][j], cols[2][j]))
    print("\nordering lambda_int <= lambda_hat(+K) <= lambda_dir holds "
          "row by row (min-max).\n")

    print("ground eigenvalue as K grows (flip_sign=True):")
    for kk in (0.0, K / 2, K, 2 * K, 1e4, 1e6):
        lam = solve_limit_spectrum(LimitBC("strange", K=kk, flip_sign=True),
                                   count=1, cutoff=0).eigenvalues()[0]
        print("  K = %-12g lambda_1 = %.10g" % (kk, lam))
    lam_dir = solve_limit_spectrum(LimitBC("dirichlet"), count=1,
                                   cutoff=0).eigenvalues()[0]
    print("  K -> inf limit (Dirichlet): %.10g\n" % lam_dir)

    literal = solve_limit_spectrum(LimitBC("strange", K=K),
                                   count=3, cutoff=0).eigenvalues()
    print("literal -K sign, lowest three (mode 0): %s" % literal)
    print("the runaway branch sits ~ -9e14; the form is unbounded below.")


if __name__ == "__main__":
    main()
