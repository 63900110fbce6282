"""Slope of log Q(R) against log R for the weighted extension ratio, per (N, s)."""

import argparse

from fracpass.analysis import appendix_rate_fit, predicted_extension_slope


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", type=float, nargs="+", default=[4.0, 8.0, 16.0, 32.0])
    ap.add_argument("--resolution", type=int, default=64)
    args = ap.parse_args()
    for N, s in [(2, 0.75), (2, 0.6), (2, 0.5), (2, 0.25), (1, 0.25), (3, 0.9)]:
        slope = appendix_rate_fit(s, N, args.R, args.resolution)
        print(f"N={N} s={s:<5g} slope {slope:+.4f}  predicted {predicted_extension_slope(N, s):+.4f}")


if __name__ == "__main__":
    main()
