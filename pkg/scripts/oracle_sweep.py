"""Master-equation spectra against the closed-form Lorentzian on the
3 x 3 x 3 grid of lifetimes, dephasing rates and pump powers."""

import argparse
import time

from emitterlab import lindblad, tls
from emitterlab.plotting import emit_svg_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--svg", default=None, help="write the relative FWHM errors here")
    args = ap.parse_args()

    start = time.perf_counter()
    rows = []
    print(f"{'t1':>5} {'dp':>6} {'P/Ps':>5} {'analytic':>10} {'numeric':>10} "
          f"{'rel err':>9} {'integral':>8}  dark")
    for t1 in (0.5, 1.57, 3.0):
        for dp in (0.0, 300.0, 1500.0):
            for r in (0.0, 1.0, 4.0):
                params = tls.EmitterParams.from_linewidths(t1, dp, p_sat=1.0, n_exp=1.0)
                cmp = lindblad.compare_with_analytic(params, tls.PumpSetting(r))
                rows.append(cmp.fwhm_ratio - 1)
                print(f"{t1:5.2f} {dp:6.0f} {r:5.1f} {cmp.fwhm_analytic:10.3f} "
                      f"{cmp.fwhm_numeric:10.3f} {cmp.fwhm_ratio - 1:9.1e} "
                      f"{cmp.integral_ratio:8.5f}  {cmp.dark}")
    print(f"worst |rel err| {max(map(abs, rows)):.2e}; {time.perf_counter() - start:.1f} s")
    if args.svg:
        emit_svg_plot([("numeric / analytic - 1", list(range(len(rows))), rows)], "scatter",
                      args.svg, "grid point", "relative FWHM error")


if __name__ == "__main__":
    main()
