"""Type-I-error and power study (reduced scale) with the analytic oracle.

Under the misspecified working model W1, the classical test is conservative
at the null and loses power; the regression-adjusted test restores both.
The analytic oracle computes the limiting rates in closed form for cells
where the balanced features span the covariate signal.

Full-scale runs: `carlab power --config <file> --out <dir>`.
"""

from carlab.datagen import CovariateSetting
from carlab.harness import (
    ExperimentSpec, procedure_preset, run_power_experiment,
    setting1_params, theoretical_power,
)

R = 400  # reduced from 2000 to keep the demo quick
spec = ExperimentSpec(
    kind="power",
    n=500,
    setting=CovariateSetting("S1"),
    procedures=(procedure_preset("CR"), procedure_preset("phi-CAR-BC")),
    replicates=R,
    base_seed=99,
    model="setting1",
    deltas=(0.0, 5.0, 10.0, 15.0),
    working_models=("W1",),
    tests=("t_ls", "t_reg"),
)
cells = {(r.procedure, r.delta, r.test): r.value for r in run_power_experiment(spec).rows}

print(f"rejection rates, working model W1 (no covariates at analysis), R={R}")
print(f"{'delta':>6} {'CR t_ls':>9} {'CAR t_ls':>9} {'CAR t_reg':>10} "
      f"{'oracle t_ls':>12} {'oracle adj':>11}")
for delta in (0.0, 5.0, 10.0, 15.0):
    ls, adj = theoretical_power(delta, setting1_params("W1"))
    print(
        f"{delta:6.0f} {cells[('CR', delta, 't_ls')]:9.3f} "
        f"{cells[('phi-CAR-BC', delta, 't_ls')]:9.3f} "
        f"{cells[('phi-CAR-BC', delta, 't_reg')]:10.3f} {ls:12.4f} {adj:11.4f}"
    )

print("\nReading the table: at delta=0 the balanced design with an unadjusted test")
print("rejects far below 0.05 (conservative); the adjusted test sits at the level")
print("and tracks the oracle's power column as delta grows.")
