"""Regenerate src/rqmcis/data/labour_force.csv.

A synthetic labour-force participation survey of 753 married women,
modelled on the classic participation-equation studies: the binary
response ``inlf`` (in labour force) plus seven covariates

    nwifeinc  other household income, $1000s
    educ      years of education
    exper     years of labour-market experience
    expersq   exper squared
    age       age in years
    kidslt6   number of children under 6
    kidsge6   number of children aged 6-18

Participation follows a deterministic index model: a household joins the
labour force exactly when a weighted participation index of the
(population-standardized) covariates is positive.  Households whose index
falls inside a central dead band are not sampled, so every record is a
clear-cut case.  This keeps the n=30 and n=100 posterior slices of the
benchmark model concentrated yet smooth, which is the regime the
convergence-rate experiments probe.

Fixed seed; rerunning reproduces the file byte for byte.

    python3 tools/make_labour_force_csv.py
"""

import os

import numpy as np

N_ROWS = 753
SEED = 20240753
MARGIN = 1.5

# population location/scale used to standardize the index inputs
POP_MEAN = np.array([19.5, 12.3, 10.6, 178.0, 45.0, 0.26, 1.35])
POP_SD = np.array([11.5, 2.2, 8.0, 233.0, 8.9, 0.5, 1.29])
# participation-index weights over
# (nwifeinc, educ, exper, expersq, age, kidslt6, kidsge6)
INDEX_W = np.array([-0.55, 0.85, 1.05, -0.25, -0.6, -1.25, 0.15])
INDEX_W = INDEX_W / np.linalg.norm(INDEX_W)


def draw_row(rng):
    while True:
        age = float(rng.integers(30, 61))
        educ = float(np.clip(np.rint(rng.normal(12.3, 2.3)), 5, 17))
        exper = float(np.clip(np.rint(rng.gamma(1.8, 5.9)), 0, 45))
        kidslt6 = float(min(rng.poisson(0.26), 3))
        kidsge6 = float(min(rng.poisson(1.35), 8))
        nwifeinc = float(np.round(np.clip(rng.lognormal(2.85, 0.55), 0.5, 96.0), 4))
        x = np.array([nwifeinc, educ, exper, exper**2, age, kidslt6, kidsge6])
        t = INDEX_W @ ((x - POP_MEAN) / POP_SD)
        if abs(t) >= MARGIN:
            return (int(t > 0), *x)


def main() -> None:
    rng = np.random.default_rng(SEED)
    rows = [draw_row(rng) for _ in range(N_ROWS)]
    out = os.path.join(
        os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
        "src",
        "rqmcis",
        "data",
        "labour_force.csv",
    )
    with open(out, "w") as fh:
        fh.write("inlf,nwifeinc,educ,exper,expersq,age,kidslt6,kidsge6\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]}," + ",".join(f"{v:.0f}" for v in r[2:]) + "\n")
    share = np.mean([r[0] for r in rows])
    print(f"wrote {out} ({N_ROWS} rows, participation share {share:.3f})")
    # the harness slices the first 30/100 rows; both need variation in
    # every covariate for standardization to be well defined
    mat = np.array([r[1:] for r in rows])
    for rows_n in (30, 100):
        assert np.all(mat[:rows_n].std(axis=0) > 0), f"constant covariate in first {rows_n}"
        share_n = np.mean([r[0] for r in rows[:rows_n]])
        assert 0 < share_n < 1, f"degenerate response in first {rows_n}"


if __name__ == "__main__":
    main()
