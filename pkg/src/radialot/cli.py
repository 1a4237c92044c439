"""Command-line interface.

Every command prints exactly one JSON object on stdout and writes artifacts
to explicit --output paths.  Exit codes: 0 success, 1 validation error,
2 I/O error.  All randomized commands take --seed, and rerunning a command
with identical flags and seed reproduces its artifacts byte for byte.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import color, estimation, gmm, rw2
from . import generators as gen
from .discrete_ot import plan_to_json
from .errors import ConfigurationError, RadialOTError
from .mixture import RadialMixture, dumps_canonical, load_mixture, mixture_to_json, save_mixture


def _emit(obj: dict) -> None:
    sys.stdout.write(dumps_canonical(obj))


def _parse_generator(name: str, beta: float) -> gen.Generator:
    if name == "imq":
        return gen.imq(beta)
    if name == "compact":
        return gen.compact_poly(beta)
    if name == "gauss":
        return gen.gaussian_kernel()
    raise ConfigurationError(f"unknown generator {name!r}")


def _load_model(path, allow_heavy_tail: bool = False):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if isinstance(obj, dict) and "generator_default" in obj:
        from .mixture import mixture_from_json

        return mixture_from_json(obj, allow_heavy_tail=allow_heavy_tail)
    if isinstance(obj, dict) and "components" in obj and obj["components"] and "cov" in obj["components"][0]:
        return gmm.gmm_from_json(obj)
    raise ConfigurationError(f"{path} is neither a radial-mixture nor a Gaussian-mixture model file")


def _parse_weights(text: str) -> np.ndarray:
    try:
        vals = np.asarray([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse weights {text!r}") from exc
    return vals


@click.group()
def cli():
    """Optimal transport for radial mixture models: fitting, distances,
    barycenters, and image color transfer."""


@cli.command()
@click.option("--input", "input_path", required=True, help="source image (PNG or JPEG)")
@click.option("--model-kind", type=click.Choice(["rmm", "gmm"]), default="rmm", show_default=True)
@click.option("--generator", "generator_name", type=click.Choice(["imq", "compact", "gauss"]),
              default="imq", show_default=True)
@click.option("--beta", type=float, default=3.0, show_default=True)
@click.option("--components", type=int, default=None,
              help="mixture size [default: 15 for rmm, 10 for gmm]")
@click.option("--batch-size", type=int, default=100, show_default=True)
@click.option("--max-iter", type=int, default=1500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--c-floor", type=float, default=None, help="scale floor [default: 1e-4 of data diameter]")
@click.option("--log", "log_path", default=None, help="training log CSV path")
@click.option("--output", required=True, help="model JSON path")
def fit(input_path, model_kind, generator_name, beta, components, batch_size, max_iter, seed,
        c_floor, log_path, output):
    """Fit a palette model to an image."""
    cloud = color.load_image(input_path)
    g = _parse_generator(generator_name, beta)
    model = color.fit_palette(
        cloud, model_kind, g, components, seed=seed, batch_size=batch_size,
        max_iter=max_iter, c_floor=c_floor, log_path=log_path,
    )
    if model_kind == "rmm":
        save_mixture(model, output)
    else:
        gmm.save_gmm(model, output)
    _emit({
        "command": "fit",
        "kind": model_kind,
        "components": model.size,
        "parameters": gmm.parameter_count(model),
        "pixels": cloud.pixels.shape[0],
        "seed": seed,
        "output": str(output),
    })


def _distance_payload(model_a, model_b):
    both_rmm = isinstance(model_a, RadialMixture) and isinstance(model_b, RadialMixture)
    both_gmm = isinstance(model_a, gmm.GaussianMixture) and isinstance(model_b, gmm.GaussianMixture)
    if both_rmm:
        res = rw2.rw2_distance(model_a, model_b)
        payload = {
            "rw2": res.distance,
            "rw2_squared": res.distance**2,
            "upper_bound_gap": rw2.rw2_upper_bound_gap(model_a, model_b),
        }
    elif both_gmm:
        res = gmm.gw2_distance(model_a, model_b)
        payload = {"gw2": res.distance, "gw2_squared": res.distance**2}
    else:
        raise ConfigurationError("both model files must be of the same kind (rmm or gmm)")
    payload["plan_support"] = int((res.plan.matrix > 0).sum())
    return res, payload


@cli.command()
@click.option("--model-a", required=True)
@click.option("--model-b", required=True)
@click.option("--allow-heavy-tail", is_flag=True, default=False,
              help="admit density-only generators (no finite second moment)")
@click.option("--output", default=None, help="optional plan JSON path")
def distance(model_a, model_b, allow_heavy_tail, output):
    """Mixture transport distance between two model files."""
    a = _load_model(model_a, allow_heavy_tail)
    b = _load_model(model_b, allow_heavy_tail)
    res, payload = _distance_payload(a, b)
    if output is not None:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(plan_to_json(res.plan)))
        payload["output"] = str(output)
    _emit({"command": "distance", **payload})


@cli.command()
@click.option("--model-a", required=True)
@click.option("--model-b", required=True)
@click.option("--output", required=True, help="plan JSON path")
def plan(model_a, model_b, output):
    """Optimal component pairing between two model files."""
    a = _load_model(model_a)
    b = _load_model(model_b)
    res, payload = _distance_payload(a, b)
    with open(output, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(plan_to_json(res.plan)))
    _emit({
        "command": "plan",
        "objective": res.plan.objective,
        "entries": int((res.plan.matrix > 0).sum()),
        "output": str(output),
        **payload,
    })


@cli.command()
@click.option("--model", "model_paths", multiple=True, required=True,
              help="radial mixture model JSON (repeat per input)")
@click.option("--weights", required=True, help="comma-separated simplex weights, one per model")
@click.option("--output", required=True, help="barycenter model JSON path")
def barycenter(model_paths, weights, output):
    """Weighted barycenter of radial mixture models."""
    models = [load_mixture(p) for p in model_paths]
    lam = _parse_weights(weights)
    bary, mplan = rw2.rw2_barycenter(models, lam)
    save_mixture(bary, output)
    _emit({
        "command": "barycenter",
        "objective": mplan.objective,
        "components": bary.size,
        "support_bound": int(sum(m.size for m in models) - len(models) + 1),
        "output": str(output),
    })


@cli.command()
@click.option("--input", "input_path", required=True, help="source image")
@click.option("--model-a", required=True, help="source palette model")
@click.option("--model-b", required=True, help="target palette model")
@click.option("--map", "map_kind", type=click.Choice(["mean", "rand"]), default="mean", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", required=True, help="output PNG path")
def transfer(input_path, model_a, model_b, map_kind, seed, output):
    """Recolor an image from its palette model onto a target palette."""
    cloud = color.load_image(input_path)
    a = _load_model(model_a)
    b = _load_model(model_b)
    out = color.transfer(cloud, a, b, map_kind=map_kind, seed=seed)
    color.save_image(out, output)
    _emit({
        "command": "transfer",
        "map": map_kind,
        "pixels": out.pixels.shape[0],
        "seed": seed,
        "output": str(output),
    })


@cli.command()
@click.option("--inputs", multiple=True, required=True, help="input image (repeat per image)")
@click.option("--reference", type=int, default=0, show_default=True,
              help="index of the image whose palette is transferred")
@click.option("--weights", "weight_list", multiple=True,
              help="comma-separated barycenter weights (repeatable)")
@click.option("--triangle-level", type=int, default=None,
              help="emit the full barycentric triangle grid at this subdivision (3 images only)")
@click.option("--generator", "generator_name", type=click.Choice(["imq", "compact", "gauss"]),
              default="imq", show_default=True)
@click.option("--beta", type=float, default=3.0, show_default=True)
@click.option("--components", type=int, default=color.AVERAGE_DEFAULT_COMPONENTS, show_default=True)
@click.option("--batch-size", type=int, default=100, show_default=True)
@click.option("--max-iter", type=int, default=1500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output-dir", required=True)
def average(inputs, reference, weight_list, triangle_level, generator_name, beta, components,
            batch_size, max_iter, seed, output_dir):
    """Color averaging: recolor the reference image toward palette barycenters."""
    import os

    clouds = [color.load_image(p) for p in inputs]
    grid = [_parse_weights(w) for w in weight_list]
    if triangle_level is not None:
        if len(inputs) != 3:
            raise ConfigurationError("--triangle-level needs exactly three input images")
        L = triangle_level
        for i in range(L + 1):
            for j in range(L + 1 - i):
                grid.append(np.array([i, j, L - i - j], dtype=float) / L)
    if not grid:
        raise ConfigurationError("give at least one --weights vector or --triangle-level")
    g = _parse_generator(generator_name, beta)
    outs = color.average_colors(
        clouds, reference, grid, g, components, seed=seed,
        batch_size=batch_size, max_iter=max_iter,
    )
    os.makedirs(output_dir, exist_ok=True)
    paths = []
    for i, (w, o) in enumerate(zip(grid, outs)):
        path = os.path.join(output_dir, f"average_{i:03d}.png")
        color.save_image(o, path)
        paths.append({"weights": [float(v) for v in w], "output": path})
    _emit({"command": "average", "count": len(paths), "outputs": paths, "seed": seed})


@cli.command("eval-error")
@click.option("--source", "source_path", required=True, help="original source image")
@click.option("--target", "target_path", required=True, help="target image")
@click.option("--transferred", "transferred_path", required=True, help="transfer output image")
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--reps", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--method", type=click.Choice(["exact", "sinkhorn"]), default="exact", show_default=True)
@click.option("--epsilon", type=float, default=None, help="entropic regularization (sinkhorn mode)")
def eval_error(source_path, target_path, transferred_path, samples, reps, seed, method, epsilon):
    """Subsampled squared transport cost of a transfer output vs the target."""
    report = color.eval_error(
        color.load_image(source_path),
        color.load_image(target_path),
        color.load_image(transferred_path),
        m=samples, reps=reps, seed=seed, method=method, epsilon=epsilon,
    )
    _emit({
        "command": "eval-error",
        "error_mean": report.error_mean,
        "error_std": report.error_std,
        "baseline_mean": report.baseline_mean,
        "baseline_std": report.baseline_std,
        "samples": report.samples,
        "reps": report.repetitions,
        "seed": report.seed,
        "method": method,
    })


@cli.command("interpolate-demo")
@click.option("--model-a", default=None, help="first mixture model JSON")
@click.option("--model-b", default=None, help="second mixture model JSON")
@click.option("--preset", type=click.Choice(["imq"]), default=None,
              help="built-in demo pair instead of model files")
@click.option("--ts", default="0,0.25,0.5,0.75,1", show_default=True)
@click.option("--grid-points", type=int, default=None,
              help="grid resolution [default: 100 in 1-D, 50 per dim in 2-D]")
@click.option("--sinkhorn-compare", is_flag=True, default=False,
              help="also emit entropic grid barycenter densities")
@click.option("--epsilon", type=float, default=None,
              help="regularization [default: 5e-4 in 1-D, 5e-3 in 2-D]")
@click.option("--allow-heavy-tail", is_flag=True, default=False)
@click.option("--output", required=True, help="CSV path for the density grids")
def interpolate_demo(model_a, model_b, preset, ts, grid_points, sinkhorn_compare, epsilon,
                     allow_heavy_tail, output):
    """Density grids along the geodesic between two mixtures."""
    if preset is not None:
        mix_a, mix_b = color.demo_preset_mixtures()
    else:
        if model_a is None or model_b is None:
            raise ConfigurationError("give --model-a and --model-b, or --preset")
        mix_a = load_mixture(model_a, allow_heavy_tail=allow_heavy_tail)
        mix_b = load_mixture(model_b, allow_heavy_tail=allow_heavy_tail)
    t_vals = [float(v) for v in ts.split(",")]
    rows, columns = color.interpolate_demo(
        mix_a, mix_b, t_vals, grid_points=grid_points,
        sinkhorn_compare=sinkhorn_compare, epsilon=epsilon,
    )
    color.write_rows_csv(rows, columns, output)
    _emit({
        "command": "interpolate-demo",
        "rows": len(rows),
        "columns": columns,
        "ts": t_vals,
        "output": str(output),
    })


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        _emit({"error": exc.format_message()})
        return 1
    except click.Abort:
        return 1
    except (RadialOTError, ValueError) as exc:
        _emit({"error": str(exc)})
        return 1
    except OSError as exc:
        _emit({"error": str(exc)})
        return 2


if __name__ == "__main__":
    sys.exit(main())
