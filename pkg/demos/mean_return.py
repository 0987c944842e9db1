"""Mean return time against system size.

The exact mean comes from one tridiagonal solve per L.  Doubling L roughly
doubles it for a < 1 and multiplies it by 2^a for a > 1.  At a = 1 the two
regimes meet and a slowly fading logarithm is left over.
"""
import argparse
import math

from rrw import WalkSpec, mean_return_exact


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-power", type=int, default=16)
    args = parser.parse_args()

    for a in (0.5, 1.0, 1.5):
        print(f"a = {a}")
        prev = None
        for k in range(6, args.max_power + 1):
            L = 2 ** k
            t1 = mean_return_exact(WalkSpec(a, L)).mean_first_return
            line = f"  L = 2^{k:<3d} <s_R> = {t1:14.6e}"
            if prev is not None:
                line += f"   log2 ratio {math.log2(t1 / prev):.4f}"
                if a == 1.0:
                    line += f"   (L ln L predicts {1 + math.log2(1 + math.log(2) / math.log(L / 2)):.4f})"
            print(line)
            prev = t1


if __name__ == "__main__":
    main()
