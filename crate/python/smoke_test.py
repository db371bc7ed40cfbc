"""Quick check that the extension imports and agrees with known numbers.

Build first:  cd crates/python && maturin develop --release
"""
import math

import qudit_py as q


def main():
    p = q.CenterParams()
    f = q.FieldConfig(bz=0.0, bperp=0.0)
    lv = q.levels(f, p)
    assert abs(lv["+3/2"] - lv["+1/2"] - 26.8) < 1e-9, lv

    # Population is conserved.
    r = q.rate_matrix(300.0, 100.0, 50.0)
    for col in range(4):
        assert abs(sum(r[row][col] for row in range(4))) < 1e-12

    modes = q.mode_frequencies(26.8, q.FieldConfig(bz=200.0, bperp=15.0))
    assert len(modes) == 9

    b, err = q.b_eff_from_fringes(11.70, 4.51, 19.0, f_r_err=0.03)
    assert abs(b - 223.7) < 0.1, b
    assert err > 0

    fld = q.FieldConfig.from_polar(223.0, 19.0)
    lines = [(name, freq) for name, freq, _ in q.transitions(fld, p) if name in ("nu1", "nu2", "nu3", "nu4")]
    inv = q.invert_field(lines)
    assert abs(inv["bz"] - fld.bz) < 0.5 and abs(inv["bperp"] - fld.bperp) < 0.5, inv

    taus = [10.0 * k for k in range(151)]
    t, s = q.ramsey(taus, dist=q.Distribution(n_packets=21))
    assert len(s) == len(taus) and all(math.isfinite(x) for x in s)
    fit = q.fft_lorentzian(t, s)
    assert 3.0 < fit["f_r"] < 6.0, fit

    print("qudit_py smoke test OK")


if __name__ == "__main__":
    main()
