"""Command-line interface.

Subcommands map one-to-one onto the library workflows: ``synth-dark``
(dark-frame batches), ``estimate-gain`` (photon-transfer fit),
``synth-noisy`` (clean -> noisy pairs), ``validate`` (realism report),
``simulate-sensor`` (synthetic ground-truth data), ``export-shading``
(per-ISO dark shading map).

Exit codes: 0 success, 1 usage error, 2 data/I-O error, 3 numerical or
degenerate-fit error. Machine-readable JSON goes to stdout when
``--json`` is given; human logs go to stderr. Output files are written
atomically, and every artifact gets a JSON sidecar naming the seeds and
parameters that produced it.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import (
    DegenerateFitError,
    DegenerateInputError,
    InsufficientDataError,
    PtbParseError,
    ShapeMismatchError,
    SymmetryViolationError,
)
from .io import atomic_write_bytes, load_meta, load_tensor, save_tensor
from .metrics import DEFAULT_BINS, validate_report
from .photon import (
    GainModel,
    VarianceSamples,
    collect_variance_pairs,
    collect_variance_single,
    fit_gain,
    synthesize_noisy,
)
from .rng import substream
from .simulate import SimConfig, generate_dark, generate_noisy_pair
from .synthesis import SynthesisConfig, _Sampler, export_dark_shading


def _log(message: str) -> None:
    click.echo(message, err=True)


def _emit(payload: dict, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(payload, indent=2))


def _write_json(path: Path, payload: dict) -> None:
    atomic_write_bytes(path, (json.dumps(payload, indent=2) + "\n").encode("ascii"))


_json_flag = click.option("--json", "as_json", is_flag=True, help="machine-readable JSON on stdout")
_threads_flag = click.option("--threads", type=int, default=1, show_default=True,
                             help="worker threads for batch generation (outputs are identical at any count)")


@click.group()
@click.version_option(version=__version__, prog_name="noisesynth")
def cli() -> None:
    """Sensor noise synthesis from a single dark frame."""


@cli.command("synth-dark")
@click.option("--dark", required=True, type=click.Path(), help="reference dark frame (PTB)")
@click.option("--out-dir", required=True, type=click.Path(), help="directory for synthesized frames")
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--sigma", type=float, default=50.0, show_default=True)
@click.option("--iters", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--start-index", type=int, default=0, show_default=True)
@click.option("--no-shared-phase", is_flag=True, help="independent phase per channel (ablation)")
@click.option("--no-ihm", is_flag=True, help="skip iterative histogram matching (ablation)")
@_json_flag
@_threads_flag
def cmd_synth_dark(dark, out_dir, count, sigma, iters, seed, start_index,
                   no_shared_phase, no_ihm, as_json, threads) -> None:
    """Synthesize COUNT dark frames from one reference frame."""
    frame, meta = load_tensor(dark)
    config = SynthesisConfig(
        sigma=sigma,
        iterations=iters,
        seed=seed,
        shared_phase=not no_shared_phase,
        histogram_matching=not no_ihm,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sampler = _Sampler(frame, config)

    def render(i: int) -> str:
        index = start_index + i
        synthetic, _ = sampler.draw_frame(index)
        path = out / f"syn_{meta.iso}_{index}.ptb"
        save_tensor(synthetic, meta, path)
        _write_json(
            path.with_suffix(".json"),
            {
                "seed": seed,
                "draw_index": index,
                "sigma": sigma,
                "iterations": iters,
                "shared_phase": not no_shared_phase,
                "histogram_matching": not no_ihm,
                "source_dark": str(dark),
                "iso": meta.iso,
            },
        )
        return str(path)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            files = list(pool.map(render, range(count)))
    else:
        files = [render(i) for i in range(count)]
    _log(f"wrote {len(files)} frames to {out}")
    _emit({"command": "synth-dark", "files": files, "seed": seed, "iso": meta.iso}, as_json)


@cli.command("estimate-gain")
@click.option("--noisy", "noisy_paths", required=True, multiple=True, type=click.Path())
@click.option("--clean", "clean_paths", multiple=True, type=click.Path(),
              help="matching clean frames; enables the pair-based estimator")
@click.option("--iso", type=int, default=None, help="override the ISO recorded in the PTB header")
@click.option("--pseudo-sigma", type=float, default=3.0, show_default=True)
@click.option("--bin-width", type=float, default=None)
@click.option("--robust", is_flag=True, help="Theil-Sen slope instead of weighted least squares")
@click.option("--out", type=click.Path(), default=None, help="also write the model JSON here")
@_json_flag
@_threads_flag
def cmd_estimate_gain(noisy_paths, clean_paths, iso, pseudo_sigma, bin_width,
                      robust, out, as_json, threads) -> None:
    """Fit the photon-transfer gain from noisy (and optionally clean) frames."""
    noisy = [load_tensor(p) for p in noisy_paths]
    meta = noisy[0][1]
    if iso is not None:
        meta = dataclasses.replace(meta, iso=iso)
    if clean_paths:
        if len(clean_paths) != len(noisy_paths):
            raise click.UsageError(
                f"{len(noisy_paths)} noisy frames vs {len(clean_paths)} clean frames"
            )
        pairs = [(load_tensor(c)[0], n[0]) for c, n in zip(clean_paths, noisy)]
        samples = collect_variance_pairs(pairs, meta, bin_width)
    else:
        pieces = [collect_variance_single(n, meta, pseudo_sigma, bin_width) for n, _ in noisy]
        samples = pieces[0]
        if len(pieces) > 1:
            samples = VarianceSamples(
                np.concatenate([p.level for p in pieces]),
                np.concatenate([p.variance for p in pieces]),
                np.concatenate([p.weight for p in pieces]),
            )
    model = fit_gain(samples, meta.iso, robust=robust)
    _log(
        f"iso={model.iso} gain={model.gain:.6g} var_intercept={model.var_intercept:.6g} "
        f"r2={model.fit_r2:.4f} points={model.fit_points}"
    )
    if out is not None:
        atomic_write_bytes(Path(out), (model.to_json() + "\n").encode("ascii"))
    if as_json:
        click.echo(model.to_json())


@cli.command("synth-noisy")
@click.option("--clean", required=True, type=click.Path(), help="clean frame (PTB, black-subtracted DN)")
@click.option("--gain", "gain_path", required=True, type=click.Path(), help="GainModel JSON")
@click.option("--dark-dir", required=True, type=click.Path(), help="directory of synthetic dark frames")
@click.option("--ratio", type=float, default=1.0, show_default=True, help="exposure ratio")
@click.option("--quantize", is_flag=True, help="round to integers and clip to the DN range")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@_json_flag
@_threads_flag
def cmd_synth_noisy(clean, gain_path, dark_dir, ratio, quantize, seed, out, as_json, threads) -> None:
    """Apply shot noise and a randomly chosen synthetic dark frame."""
    clean_img, clean_meta = load_tensor(clean)
    model = GainModel.from_json(Path(gain_path).read_text())
    candidates = sorted(Path(dark_dir).glob("*.ptb"))
    matching = [p for p in candidates if load_meta(p)[1].iso == model.iso]
    if not matching:
        raise FileNotFoundError(
            f"no dark frames for ISO {model.iso} in {dark_dir} "
            f"({len(candidates)} .ptb files scanned)"
        )
    pick = int(substream(seed, 1).integers(len(matching)))
    dark_img, dark_meta = load_tensor(matching[pick])
    noisy = synthesize_noisy(
        clean_img, model, dark_img, dark_meta, ratio=ratio, quantize=quantize, seed=seed
    )
    save_tensor(noisy, clean_meta, Path(out))
    _write_json(
        Path(out).with_suffix(".json"),
        {
            "seed": seed,
            "clean": str(clean),
            "gain": str(gain_path),
            "dark_frame": str(matching[pick]),
            "ratio": ratio,
            "quantize": quantize,
        },
    )
    _log(f"wrote {out} (dark frame: {matching[pick].name})")
    _emit({"command": "synth-noisy", "file": str(out), "dark_frame": str(matching[pick])}, as_json)


@cli.command("validate")
@click.option("--ref", required=True, type=click.Path(), help="reference dark frame (PTB)")
@click.option("--syn", required=True, type=click.Path(), help="candidate dark frame (PTB)")
@click.option("--sigma", type=float, default=50.0, show_default=True)
@click.option("--bins", type=int, default=DEFAULT_BINS, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="also write the report JSON here")
@_json_flag
@_threads_flag
def cmd_validate(ref, syn, sigma, bins, out, as_json, threads) -> None:
    """Compare two dark frames' residual noise statistics."""
    ref_img, _ = load_tensor(ref)
    syn_img, _ = load_tensor(syn)
    report = validate_report(ref_img, syn_img, sigma, bins)
    worst_kld = max(report.to_dict()["kld_per_channel"])
    _log(f"worst per-channel KLD {worst_kld:.5f}, spectral L2 {report.spectral_l2:.3e}")
    if out is not None:
        atomic_write_bytes(Path(out), (report.to_json() + "\n").encode("ascii"))
    if as_json:
        click.echo(report.to_json())


@cli.command("simulate-sensor")
@click.option("--config", "config_path", required=True, type=click.Path(), help="SimConfig JSON")
@click.option("--out-prefix", required=True, type=click.Path())
@click.option("--pairs", type=int, default=0, show_default=True, help="clean/noisy pairs to write")
@click.option("--seed", type=int, default=None, help="override the config seed")
@_json_flag
@_threads_flag
def cmd_simulate_sensor(config_path, out_prefix, pairs, seed, as_json, threads) -> None:
    """Generate ground-truth frames from the synthetic sensor."""
    cfg = SimConfig.from_json(Path(config_path).read_text())
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    dark, meta, truth = generate_dark(cfg)
    files = {}
    dark_path = Path(f"{prefix}_dark.ptb")
    save_tensor(dark, meta, dark_path)
    files["dark"] = str(dark_path)
    fpn_path = Path(f"{prefix}_fpn.ptb")
    save_tensor(dark.with_data(truth.fpn), meta, fpn_path)
    files["fpn"] = str(fpn_path)
    truth_path = Path(f"{prefix}_truth.json")
    _write_json(truth_path, {"config": json.loads(cfg.to_json()), "truth": truth.summary()})
    files["truth"] = str(truth_path)
    pair_files = []
    for i in range(pairs):
        clean, noisy = generate_noisy_pair(cfg, seed=cfg.seed + i, scene_seed=cfg.seed + i)
        cp, np_ = Path(f"{prefix}_clean_{i}.ptb"), Path(f"{prefix}_noisy_{i}.ptb")
        save_tensor(clean, meta, cp)
        save_tensor(noisy, meta, np_)
        pair_files.append({"clean": str(cp), "noisy": str(np_)})
    _log(f"wrote dark + fpn + truth + {pairs} pairs under prefix {prefix}")
    _emit({"command": "simulate-sensor", "files": files, "pairs": pair_files}, as_json)


@cli.command("export-shading")
@click.option("--dark", required=True, type=click.Path(), help="dark frame (PTB)")
@click.option("--sigma", type=float, default=50.0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@_json_flag
@_threads_flag
def cmd_export_shading(dark, sigma, out, as_json, threads) -> None:
    """Write the per-ISO dark shading map (smooth pattern + channel offsets)."""
    frame, meta = load_tensor(dark)
    shading = export_dark_shading(frame, sigma)
    save_tensor(shading, meta, Path(out))
    _write_json(Path(out).with_suffix(".json"), {"source_dark": str(dark), "sigma": sigma})
    _log(f"wrote {out}")
    _emit({"command": "export-shading", "file": str(out)}, as_json)


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help / --version
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except (DegenerateFitError, InsufficientDataError, SymmetryViolationError, DegenerateInputError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except (PtbParseError, ShapeMismatchError, OSError, ValueError, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
