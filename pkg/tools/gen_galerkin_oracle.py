"""Exact Galerkin and mass matrices of the Green's kernel for small grids (sympy, rational)."""

import json
from pathlib import Path

import sympy as sp

s, t = sp.symbols("s t")


def hats(n):
    h = sp.Rational(1, n - 1)
    nodes = [k * h for k in range(n)]
    out = []
    for i in range(n):
        pieces = []
        if i > 0:
            pieces.append(((t - nodes[i - 1]) / h, nodes[i - 1], nodes[i]))
        if i < n - 1:
            pieces.append(((nodes[i + 1] - t) / h, nodes[i], nodes[i + 1]))
        out.append(pieces)
    return out


def exact_matrices(n):
    basis = hats(n)
    a = sp.zeros(n, n)
    m = sp.zeros(n, n)
    for i in range(n):
        for j in range(n):
            total = 0
            for fi, ai, bi in basis[i]:
                fi_s = fi.subs(t, s)
                for fj, aj, bj in basis[j]:
                    # w(s) = int K(s, t) phi_j(t) dt takes a different form on
                    # each side of supp(phi_j); split the s-integral there
                    cuts = sorted({ai, bi, *(c for c in (aj, bj) if ai < c < bi)})
                    for c0, c1 in zip(cuts[:-1], cuts[1:]):
                        mid = (c0 + c1) / 2
                        below = bj if mid >= bj else (s if mid > aj else None)
                        above = aj if mid <= aj else (s if mid < bj else None)
                        w = 0
                        if below is not None:
                            w += sp.integrate(t * (1 - s) * fj, (t, aj, below))
                        if above is not None:
                            w += sp.integrate(s * (1 - t) * fj, (t, above, bj))
                        total += sp.integrate(sp.expand(fi_s * w), (s, c0, c1))
            a[i, j] = sp.nsimplify(total)
            mm = 0
            for fi, ai, bi in basis[i]:
                for fj, aj, bj in basis[j]:
                    lo, hi = sp.Max(ai, aj), sp.Min(bi, bj)
                    if lo < hi:
                        mm += sp.integrate(fi * fj, (t, lo, hi))
            m[i, j] = mm
    return a, m


def main():
    out = {}
    for n in (3, 4, 6):
        a, m = exact_matrices(n)
        out[str(n)] = {
            "galerkin": [[str(a[i, j]) for j in range(n)] for i in range(n)],
            "mass": [[str(m[i, j]) for j in range(n)] for i in range(n)],
        }
    path = Path(__file__).resolve().parents[1] / "tests" / "data" / "galerkin_exact.json"
    path.write_text(json.dumps(out, indent=1))
    print("wrote", path)


if __name__ == "__main__":
    main()
