# Whole-cube benchmark through the command-line surface.
# Builds a small synthetic cube, saves it in the native format, then drives
# the bench subcommand (sparsify -> compress -> recover per algorithm ->
# report) exactly as a shell user would, and reads the resulting CSV back.
#
# Everything lands in ./pipeline_out relative to the working directory.

from pathlib import Path

from hypercs import generate_synthetic_cube, save_cube, read_report
from hypercs.cli import main

out = Path("pipeline_out")
out.mkdir(exist_ok=True)
cube_path = out / "scene.hsc"
save_cube(generate_synthetic_cube(8, 8, 48, kappa_true=3, seed=21), cube_path)
print(f"wrote {cube_path} (8x8 pixels, 48 bands, 3 planted coefficient pairs)")

# --- the same call a shell user would make ------------------------------------
#   hypercs bench --input pipeline_out/scene.hsc --out pipeline_out/run \
#       --algo gomp --kappa 3 --algo fista --lambda 0.001 \
#       --T 0.01 --ratio 0.4 --seed 5 --t-conv 0 --max-iter 20000 \
#       --export-bands 0,12,24
code = main(
    [
        "bench",
        "--input", str(cube_path),
        "--out", str(out / "run"),
        "--algo", "gomp",
        "--kappa", "3",
        "--algo", "fista",
        "--lambda", "0.001",
        "--T", "0.01",
        "--ratio", "0.4",
        "--seed", "5",
        "--t-conv", "0",        # disable the per-pixel time budget: deterministic
        "--max-iter", "20000",
        "--export-bands", "0,12,24",
    ]
)
print(f"bench exit code: {code}")

# --- read the report back through the library ----------------------------------
rows = read_report(out / "run" / "report.csv")
print(f"\n{'algorithm':10s} {'param':12s} {'psnr dB':>10s} {'iters':>8s} {'conv %':>7s}")
for row in rows:
    psnr_text = "identical" if row.psnr_db == float("inf") else f"{row.psnr_db:.2f}"
    print(
        f"{row.algorithm:10s} {row.param_label:12s} {psnr_text:>10s} "
        f"{row.total_iterations:8d} {row.convergence_pct:7.2f}"
    )

ppms = sorted((out / "run").glob("*.ppm"))
print(f"\nfalse-color previews: {', '.join(p.name for p in ppms)}")
