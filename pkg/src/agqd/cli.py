"""Command-line interface.

Subcommands cover the artifact's batch workflows: sampling point clouds
(``sample``), evaluating detections (``eval``), generating synthetic scenes
(``synth``), perturbing clouds with seeded noise (``perturb``), running the
toy decoder end to end (``agdemo``) and timing the samplers (``bench``).
Report-producing commands write CSV plus a rendered figure next to it
(``--no-plot`` skips the figure).  Every command is deterministic given its
``--seed``.

Exit codes: 0 success, 2 validation/usage error, 3 I/O or parse error.
"""

from __future__ import annotations

import csv
import functools
import sys
import time
from pathlib import Path

import click
import numpy as np

from .core import (
    AttentionField,
    PackingFailedError,
    PointCloud,
    SamplerConfig,
    SampleSet,
    Scene,
    ValidationError,
)
from . import fileio, report
from .fileio import ParseError
from .metrics import SCANNET18_CLASSES, EvalConfig, mean_ap
from .nncore import embed_points
from .noise import NoiseConfig, perturb
from .qdagg import (
    DecoderParams,
    HeadParams,
    SeeQueryState,
    decoder_forward_per_layer,
    decoder_trace,
    detection_head,
)
from .sampling import ag_sample, ag_sample_oracle, fps
from .synthgen import SceneSpec, concentration, generate


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn):
    """Map domain errors onto the CLI exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ParseError as exc:
            _fail(str(exc), 3)
        except OSError as exc:
            _fail(str(exc), 3)
        except (ValidationError, PackingFailedError) as exc:
            _fail(str(exc), 2)

    return wrapper


@click.group()
def main():
    """Attention-guided sampling, query-driven aggregation and 3D detection tools."""


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _load_cloud_and_attention(cloud_path, attn_path):
    cloud, attn = fileio.read_ply(cloud_path)
    if attn_path is not None:
        _, attn = fileio.read_ply(attn_path)
        if attn is None:
            raise ValidationError(f"{attn_path} carries no attn property")
        attn.paired_with(cloud)
    return cloud, attn


def _write_indices(path, samples: SampleSet) -> None:
    Path(path).write_text("\n".join(str(i) for i in samples.indices) + "\n")


def _subcloud(cloud: PointCloud, attn, samples: SampleSet):
    idx = samples.as_array()
    sub_attn = AttentionField(attn.weights[idx]) if attn is not None else None
    return PointCloud(cloud.points[idx]), sub_attn


@main.command()
@click.argument("cloud_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--attn", "attn_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="PLY file carrying the attn property (defaults to the cloud's own column).")
@click.option("--k", default=256, show_default=True, help="Number of samples.")
@click.option("--lambda", "lambdas", multiple=True, type=float,
              help="Dispersion trade-off; repeat for a sweep. [default: 0.8]")
@click.option("--method", type=click.Choice(["fps", "ag", "ag-oracle"]), default="ag",
              show_default=True)
@click.option("--start", default=None, type=int,
              help="Fixed start index (default: highest attention for ag, 0 for fps).")
@click.option("--epsilon", default=1e-8, show_default=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Ground-truth boxes; adds a concentration column to the sweep CSV.")
@click.option("-o", "--out-prefix", required=True, type=click.Path())
@click.option("--plot/--no-plot", default=True, show_default=True)
@guarded
def sample(cloud_path, attn_path, k, lambdas, method, start, epsilon, gt_path,
           out_prefix, plot):
    """Sample K query points from a point cloud."""
    cloud, attn = _load_cloud_and_attention(cloud_path, attn_path)
    if method in ("ag", "ag-oracle") and attn is None:
        raise ValidationError(f"method={method} needs an attention field")
    gt = fileio.read_detections(gt_path) if gt_path else None
    lambdas = list(lambdas) or [0.8]
    sweep = len(lambdas) > 1

    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for lam in lambdas:
        if method == "fps":
            samples = fps(cloud, k, start_index=0 if start is None else start)
        else:
            cfg = SamplerConfig(k=k, lambda_dist=lam, epsilon=epsilon, start_index=start)
            sampler = ag_sample if method == "ag" else ag_sample_oracle
            samples = sampler(cloud, attn, cfg)

        stem = f"{out_prefix}_lambda{lam:g}" if sweep else str(out_prefix)
        _write_indices(f"{stem}.indices.txt", samples)
        sub_cloud, sub_attn = _subcloud(cloud, attn, samples)
        fileio.write_ply(f"{stem}.ply", sub_cloud, sub_attn)

        scene = None
        if gt is not None:
            placeholder = AttentionField(np.zeros(len(cloud)))
            scene = Scene(cloud=cloud, attention=attn or placeholder, gt=gt)

        row = {"lambda": lam, "method": method, "k": len(samples)}
        if scene is not None:
            row["concentration"] = concentration(samples, scene)
        rows.append(row)
        if plot:
            report.save_sample_figure(
                cloud, samples, f"{stem}.png", scene=scene,
                title=f"{method}, k={len(samples)}"
                + (f", lambda={lam:g}" if method != "fps" else ""),
            )
        click.echo(f"{stem}: {len(samples)} samples"
                   + (f", concentration {row['concentration']:.4f}" if gt else ""))

    if sweep:
        fields = list(rows[0].keys())
        with open(f"{out_prefix}_sweep.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
        if plot and gt is not None:
            report.save_sweep_figure(
                [r["lambda"] for r in rows],
                [r["concentration"] for r in rows],
                "concentration",
                f"{out_prefix}_sweep.png",
            )


def _resolve_classes(classes: str) -> tuple[str, ...]:
    if not classes:
        return ()
    if classes == "scannet18":
        return SCANNET18_CLASSES
    return tuple(tok for tok in classes.split(",") if tok)


def _detection_files(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(path.glob("*.json"))
    return [path]


@main.command("eval")
@click.argument("preds_path", type=click.Path(exists=True))
@click.argument("gt_path", type=click.Path(exists=True))
@click.option("--iou", default=0.25, show_default=True)
@click.option("--classes", default="", help="'scannet18' or a comma-separated name list.")
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--plot/--no-plot", default=True, show_default=True)
@guarded
def eval_cmd(preds_path, gt_path, iou, classes, out_dir, plot):
    """Score predictions against ground truth (mAP at an IoU threshold).

    PREDS_PATH and GT_PATH are detection JSON files, or directories of them
    paired by file name for multi-scene evaluation.
    """
    cfg = EvalConfig(iou_threshold=iou, classes=_resolve_classes(classes))
    pred_files = _detection_files(Path(preds_path))
    gt_files = _detection_files(Path(gt_path))
    if len(pred_files) > 1 or len(gt_files) > 1:
        by_name = {p.name: p for p in pred_files}
        missing = [g.name for g in gt_files if g.name not in by_name]
        if missing:
            raise ValidationError(f"no prediction file for scenes: {missing}")
        pairs = [(by_name[g.name], g) for g in gt_files]
    else:
        pairs = [(pred_files[0], gt_files[0])]

    preds = [fileio.read_detections(p) for p, _ in pairs]
    gts = [fileio.read_detections(g) for _, g in pairs]
    per_class, mean = mean_ap(preds, gts, cfg)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_metrics_csv(out / "ap.csv", per_class, mean, cfg)
    if plot:
        order = sorted(per_class)
        report.save_ap_figure(
            [cfg.class_name(l) for l in order], [per_class[l] for l in order],
            mean, out / "ap.png",
        )
    for label in sorted(per_class):
        click.echo(f"{cfg.class_name(label)}: AP {per_class[label]:.4f}")
    click.echo(f"mAP@{iou:g}: {mean:.4f}")


@main.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--points", default=2000, show_default=True)
@click.option("--objects", default="3,7", show_default=True, help="min,max object count.")
@click.option("--room", default="8,6,3", show_default=True, help="Room extents x,y,z.")
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--plot/--no-plot", default=True, show_default=True)
@guarded
def synth(seed, points, objects, room, out_dir, plot):
    """Generate a deterministic synthetic scene (PLY cloud + GT boxes)."""
    lo, hi = _parse_ints(objects)
    rx, ry, rz = _parse_floats(room)
    spec = SceneSpec(room=(rx, ry, rz), object_count=(lo, hi), points=points, seed=seed)
    scene = generate(spec)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_ply(out / "scene.ply", scene.cloud, scene.attention)
    fileio.write_detections(out / "gt.json", scene.gt)
    if plot:
        report.save_sample_figure(
            scene.cloud, SampleSet(()), out / "scene.png", scene=scene,
            title=f"synthetic scene, seed {seed}",
        )
    click.echo(f"{out}: {len(scene.cloud)} points, {len(scene.gt)} objects")


@main.command("perturb")
@click.argument("cloud_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--noise-level", required=True, type=float,
              help="Noise sigma as a fraction of the cloud's value range.")
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--out-path", required=True, type=click.Path())
@guarded
def perturb_cmd(cloud_path, noise_level, seed, out_path):
    """Add seeded Gaussian noise to a point cloud."""
    cloud, attn = fileio.read_ply(cloud_path)
    noisy = perturb(cloud, NoiseConfig(noise_level=noise_level, seed=seed))
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    fileio.write_ply(out_path, noisy, attn)
    click.echo(f"{out_path}: {len(noisy)} points, noise level {noise_level:g}")


@main.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--strategy", type=click.Choice(["qd", "last-layer", "sequential-4"]),
              default="qd", show_default=True)
@click.option("--k", default=16, show_default=True, help="Object query count.")
@click.option("--layers", default=4, show_default=True, help="Decoder layers.")
@click.option("--dim", default=64, show_default=True, help="Model dim.")
@click.option("--heads", default=4, show_default=True)
@click.option("--tokens", default=128, show_default=True, help="Encoder token count.")
@click.option("--lambda", "lam", default=0.8, show_default=True)
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--plot/--no-plot", default=True, show_default=True)
@guarded
def agdemo(seed, strategy, k, layers, dim, heads, tokens, lam, out_dir, plot):
    """Run a seeded toy decoder forward pass end to end.

    Generates a synthetic scene, samples query locations with the
    attention-guided sampler, embeds them, and decodes boxes with one of
    three feature-aggregation strategies: see-query driven (qd), final
    level only (last-layer), or one level per layer from shallow to deep
    (sequential-4).
    """
    scene = generate(SceneSpec(seed=seed))
    samples = ag_sample(scene.cloud, scene.attention, SamplerConfig(k=k, lambda_dist=lam))
    queries = embed_points(scene.cloud.points[samples.as_array()], dim)

    rng = np.random.default_rng(seed)
    num_levels = 4
    num_classes = 4
    levels = _random_levels(rng, num_levels, tokens, dim)
    state = SeeQueryState.random(rng, dim, num_levels)
    params = DecoderParams.random(rng, dim, heads, layers)
    head = HeadParams.random(rng, dim, num_classes)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if strategy == "qd":
        decoded, weights, _ = decoder_trace(queries, levels, state, params)
        with open(out / "weights.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["layer"] + [f"level{t}" for t in levels.level_ids])
            for layer_idx, w in enumerate(weights):
                writer.writerow([layer_idx] + [repr(float(x)) for x in w])
        if plot:
            report.save_weights_figure(weights, levels.level_ids, out / "weights.png")
    else:
        if strategy == "last-layer":
            targets = [levels.levels[-1]] * layers
        else:  # sequential-4: cycle the levels shallow to deep across layers
            targets = [levels.levels[i % num_levels] for i in range(layers)]
        decoded = decoder_forward_per_layer(queries, targets, params)

    detections = detection_head(decoded, head)
    fileio.write_detections(out / "detections.json", detections)
    fileio.write_model_params(out / "params.json", state, params, head)
    click.echo(
        f"{out}: strategy {strategy}, {len(detections)} detections, "
        f"{num_classes} classes"
    )


def _random_levels(rng, num_levels, tokens, dim):
    from .core import FeatureLevels
    from .qdagg import DEFAULT_LEVEL_TAGS

    tags = DEFAULT_LEVEL_TAGS if num_levels == len(DEFAULT_LEVEL_TAGS) else tuple(range(num_levels))
    return FeatureLevels(rng.normal(0.0, 1.0, (num_levels, tokens, dim)), tags)


@main.command()
@click.option("--sizes", default="1000,10000,100000", show_default=True,
              help="Comma-separated point counts.")
@click.option("--ks", default="256", show_default=True, help="Comma-separated sample counts.")
@click.option("--lambda", "lam", default=0.8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--oracle-max", default=2000, show_default=True,
              help="Run the reference sampler only up to this N.")
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--plot/--no-plot", default=True, show_default=True)
@guarded
def bench(sizes, ks, lam, seed, oracle_max, out_dir, plot):
    """Time the samplers across an N x k grid (CSV + figure).

    Before timing anything, the fast attention-guided path is checked for
    exact index agreement with the from-scratch reference at N = 2000.
    """
    sizes = _parse_ints(sizes)
    ks = _parse_ints(ks)
    rng = np.random.default_rng(seed)

    spot_n, spot_k = 2000, 128
    cloud, attn = _random_instance(rng, spot_n)
    cfg = SamplerConfig(k=spot_k, lambda_dist=lam)
    fast = ag_sample(cloud, attn, cfg)
    reference = ag_sample_oracle(cloud, attn, cfg)
    if fast.indices != reference.indices:
        raise ValidationError(
            f"fast sampler diverged from the reference at N={spot_n}, k={spot_k}"
        )
    click.echo(f"oracle spot check passed (N={spot_n}, k={spot_k})")

    rows = []
    for n in sizes:
        cloud, attn = _random_instance(rng, n)
        for k in ks:
            if k > n:
                continue
            cfg = SamplerConfig(k=k, lambda_dist=lam)
            runs = [("fps", lambda: fps(cloud, k)),
                    ("ag", lambda: ag_sample(cloud, attn, cfg))]
            if n <= oracle_max:
                runs.append(("ag-oracle", lambda: ag_sample_oracle(cloud, attn, cfg)))
            for method, thunk in runs:
                start = time.perf_counter()
                thunk()
                seconds = time.perf_counter() - start
                rows.append({"method": method, "n": n, "k": k, "seconds": seconds})
                click.echo(f"{method:9s} n={n:<8d} k={k:<5d} {seconds:8.4f}s")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["method", "n", "k", "seconds"])
        writer.writeheader()
        writer.writerows(rows)
    if plot:
        report.save_bench_figure(rows, out / "bench.png")


def _random_instance(rng, n):
    cloud = PointCloud(rng.uniform(0.0, 10.0, (n, 3)))
    attn = AttentionField(rng.uniform(0.0, 1.0, n))
    return cloud, attn


if __name__ == "__main__":
    main()
