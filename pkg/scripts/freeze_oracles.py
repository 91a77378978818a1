"""Write closed-form reference values to tests/data/frozen_oracles.json.

Every value here comes from an analytic formula evaluated with scipy/mpmath,
not from the package, so the tests compare the package against fixed numbers.
"""

import json
import math
from pathlib import Path

import mpmath as mp
from scipy import optimize, stats

mp.mp.dps = 30


def sup_gap_normal(s1: float, s2: float) -> float:
    f = lambda x: -abs(stats.norm.cdf(x, scale=s1) - stats.norm.cdf(x, scale=s2))
    res = optimize.minimize_scalar(f, bounds=(-10, 0), method="bounded", options={"xatol": 1e-12})
    return -res.fun


def main() -> None:
    e = math.e
    values = {
        "poisson_drift_mean": e / (e - 1.0),
        "half_log_n": {str(n): 0.5 * math.log(n) for n in (2, 3, 4, 8, 16)},
        "contcond6": {
            str(d): {str(n): n**d * math.log(n) ** (1 + d) for n in (2, 4, 8, 16)} for d in (0.5, 1.0, 2.0)
        },
        "dufresne_mean_mu3": 0.25,
        "dufresne_median_mu1": float(1.0 / (2.0 * mp.log(2))),
        "dufresne_median_mu3": 1.0 / (2.0 * stats.gamma(3).ppf(0.5)),
        "ks_gap_n01_n04": sup_gap_normal(1.0, 2.0),
        "ks_two_sample_crit_99_1e5": math.sqrt(-0.5 * math.log(0.005)) * math.sqrt(2.0 / 1e5),
        "wrong_law_residual_n04": 2 * 4 / 5**1.5 - 1 / math.sqrt(5),
        # U: one atom z = e^{-1} - 1 of rate 1, γ_U = 0; L = 0; f = exp(-x²/2) at x = 1:
        # A f(1) = f(1 + z) - f(1) - f'(1) z
        "gen_ul_atom_example": math.exp(-math.exp(-2) / 2) - math.exp(-0.5) - math.exp(-0.5) * (1 - math.exp(-1)),
        # ξ Poisson(1) unit jumps, η_t = t, same f and x: A f(1) = f'(1) + f(e^{-1}) - f(1)
        "gen_poisson_drift_example": math.exp(-math.exp(-2) / 2) - 2.0 * math.exp(-0.5),
        "e1_of_1": float(mp.e1(1)),
        "ul_gamma_u_poisson": math.exp(-1) - 1.0,
        "tempered_stable_psi": {
            str(u): 2 * math.gamma(-0.5) * ((1 + u * u) ** 0.25 * math.cos(0.5 * math.atan(u)) - 1.0)
            for u in (1.0, 2.0)
        },
        "gaussian_cf_at_1": math.exp(-0.5),
    }
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "frozen_oracles.json"
    out.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
