"""Calibration for the structured-vs-random shape checks.

Runs the planted-partition synthetic over several seeds and reports the
margins the acceptance suite pins: bfs-on-truth correct vs random correct,
the validation-selected model, and that model's efficiency at p=0 and p=0.5.

    python benchmarks/calibrate_shape.py [--seeds 0,1,2,3,4] [--workdir DIR]
"""

import argparse
import json
import tempfile
import time
from pathlib import Path

from netmdl import cli
from netmdl import evaluation as ev

SEEDS = (0, 1, 2, 3, 4)
ROSTER = ["bfs@truth", "cluster@truth", "random", "activity_top"]


def shape_config(seed, workdir):
    return cli.RunConfig(
        synthetic={"n_nodes": 200, "n_items": 400, "seed": seed, "mean_activity": 40,
                   "label_community_alignment": 0.9, "n_labelsets": 2},
        bundle=str(Path(workdir) / f"bundle{seed}"),
        output=str(Path(workdir) / f"out{seed}"),
        roster=list(ROSTER),
        b=5,
        K=(10, 20, 30),
        master_seed=seed,
    )


def run_seed(seed, workdir):
    cfg = shape_config(seed, workdir)
    cli.cmd_ingest(cfg)
    table, doc, models, data = cli.evaluate_partition(cfg, "validation")
    ecfg = cfg.eval_config()
    selected = ev.select(table)
    rows = ev.noise_sweep(models, [selected], [0.0, 0.5], data, ecfg, table)
    pooled = {r.name: r.pooled for r in table.results}
    return {
        "seed": seed,
        "correct": {n: e.correct_total for n, e in pooled.items()},
        "efficiency": {n: e.efficiency for n, e in pooled.items()},
        "selected": selected,
        "noise": {r.p: r.efficiency for r in rows},
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default=",".join(map(str, SEEDS)))
    ap.add_argument("--workdir")
    args = ap.parse_args(argv)
    workdir = args.workdir or tempfile.mkdtemp(prefix="calib")
    out = []
    for seed in (int(s) for s in args.seeds.split(",")):
        t = time.perf_counter()
        r = run_seed(seed, workdir)
        r["seconds"] = round(time.perf_counter() - t, 1)
        out.append(r)
        c = r["correct"]
        print(f"seed {seed}: correct bfs={c['bfs@truth']} random={c['random']} "
              f"margin={c['bfs@truth'] / max(c['random'], 1):.2f}x selected={r['selected']} "
              f"E(p=0)={r['noise'][0.0]:.5g} E(p=0.5)={r['noise'][0.5]:.5g} "
              f"drop={1 - r['noise'][0.5] / r['noise'][0.0]:.1%} [{r['seconds']}s]")
    print(json.dumps(out, indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
