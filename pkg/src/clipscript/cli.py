"""Command-line entry points: reconstruct, eval, make-corpus, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import scene as world
from .adapters.base import AdapterConfig, AdapterSet
from .adapters.simulation import SimulationParams, build_simulation_adapters
from .engine import fixed_iterations, run_reconstruction
from .errors import ClipscriptError
from .media import MediaService, encode_scene_clip, parse_scene_clip
from .model import STATUS_FAILED, StoppingPolicy
from .similarity import aggregate_curves, corpus_stats, curves_table


def _sim_params(seed: int, init_errors: int, fix_per_iter: int, p_drift: float) -> SimulationParams:
    return SimulationParams(
        seed=seed, init_errors=init_errors, fix_per_iter=fix_per_iter, p_drift=p_drift
    )


def _build_adapters(
    adapter: str,
    media: MediaService,
    params: SimulationParams,
    endpoint: str | None,
    credential_env: str | None,
    timeout: float,
    max_retries: int,
) -> AdapterSet:
    if adapter == "sim":
        return build_simulation_adapters(media, params)
    if not endpoint or not credential_env:
        raise click.UsageError(
            "--adapter remote requires --endpoint and --credential-env"
        )
    from .adapters.remote import build_remote_adapters

    config = AdapterConfig(
        kind="remote",
        endpoint=endpoint,
        credential_ref=credential_env,
        timeout=timeout,
        max_retries=max_retries,
    )
    return build_remote_adapters(media, config)


def _sim_options(fn):
    fn = click.option("--init-errors", default=3, show_default=True, help="Simulation: attributes wrong in the initial prompt.")(fn)
    fn = click.option("--fix-per-iter", default=2, show_default=True, help="Simulation: attributes fixed per comparison.")(fn)
    fn = click.option("--p-drift", default=0.0, show_default=True, help="Simulation: probability of perturbing a converged prompt.")(fn)
    return fn


def _remote_options(fn):
    fn = click.option("--endpoint", default=None, help="Remote backend base URL.")(fn)
    fn = click.option("--credential-env", default=None, help="Env var holding the backend credential.")(fn)
    fn = click.option("--timeout", default=30.0, show_default=True)(fn)
    fn = click.option("--max-retries", default=2, show_default=True)(fn)
    return fn


@click.group()
@click.version_option()
def main() -> None:
    """Reverse-engineer clips into prompts, evaluate the loop, serve the API."""


@main.command()
@click.argument("video_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--adapter", type=click.Choice(["sim", "remote"]), default="sim", show_default=True)
@click.option("--max-iters", default=10, show_default=True)
@click.option("--patience", default=2, show_default=True)
@click.option("--min-delta", default=0.0, show_default=True)
@click.option("--frames-per-clip", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@_sim_options
@_remote_options
def reconstruct(
    video_path: Path,
    adapter: str,
    max_iters: int,
    patience: int,
    min_delta: float,
    frames_per_clip: int,
    seed: int,
    out: Path,
    init_errors: int,
    fix_per_iter: int,
    p_drift: float,
    endpoint: str | None,
    credential_env: str | None,
    timeout: float,
    max_retries: int,
) -> None:
    """Run the reconstruction loop on one clip and write the session,
    per-iteration media, and the score trace to OUT."""
    out.mkdir(parents=True, exist_ok=True)
    media = MediaService(out)
    params = _sim_params(seed, init_errors, fix_per_iter, p_drift)
    adapters = _build_adapters(
        adapter, media, params, endpoint, credential_env, timeout, max_retries
    )
    try:
        clip = media.ingest_clip(video_path.read_bytes())
        policy = StoppingPolicy(
            max_iterations=max_iters, patience=patience, min_delta=min_delta
        )
        session = run_reconstruction(
            clip, adapters, policy, frames_per_clip=frames_per_clip
        )
    except ClipscriptError as exc:
        raise click.ClickException(str(exc)) from exc

    from .model import session_to_dict

    (out / "session.json").write_text(
        json.dumps(session_to_dict(session, media), indent=1), encoding="utf-8"
    )
    lines = ["iteration\tscore"]
    lines += [f"{r.index}\t{r.score.value!r}" for r in session.records]
    (out / "trace.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    iterations_dir = out / "iterations"
    iterations_dir.mkdir(exist_ok=True)
    for r in session.records:
        data = media.get(r.generated_clip.media_ref)
        ext = "json" if parse_scene_clip(data) is not None else "bin"
        (iterations_dir / f"iteration_{r.index:02d}.{ext}").write_bytes(data)

    click.echo(
        f"status={session.status} iterations={len(session.records)} "
        f"best_index={session.best_index} "
        f"best_score={session.records[session.best_index - 1].score.value:.4f}"
        if session.records
        else f"status={session.status}"
    )
    if session.status == STATUS_FAILED:
        click.echo(f"failure: {session.failure_reason}", err=True)
        sys.exit(1)


@main.command("eval")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--iterations", default=10, show_default=True)
@click.option("--adapter", type=click.Choice(["sim", "remote"]), default="sim", show_default=True)
@click.option("--frames-per-clip", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@_sim_options
@_remote_options
def eval_corpus(
    corpus_dir: Path,
    iterations: int,
    adapter: str,
    frames_per_clip: int,
    seed: int,
    out: Path,
    init_errors: int,
    fix_per_iter: int,
    p_drift: float,
    endpoint: str | None,
    credential_env: str | None,
    timeout: float,
    max_retries: int,
) -> None:
    """Run the loop for a fixed number of iterations over every clip in
    CORPUS_DIR; write convergence curves, per-clip traces, and stats."""
    out.mkdir(parents=True, exist_ok=True)
    media = MediaService(out)
    params = _sim_params(seed, init_errors, fix_per_iter, p_drift)
    adapters = _build_adapters(
        adapter, media, params, endpoint, credential_env, timeout, max_retries
    )
    clip_files = sorted(p for p in corpus_dir.iterdir() if p.is_file())
    if not clip_files:
        raise click.ClickException(f"no clip files in {corpus_dir}")

    traces = []
    for path in clip_files:
        try:
            clip = media.ingest_clip(path.read_bytes())
            session = fixed_iterations(
                clip, adapters, iterations, frames_per_clip=frames_per_clip
            )
        except ClipscriptError as exc:
            raise click.ClickException(f"{path.name}: {exc}") from exc
        if session.status == STATUS_FAILED:
            click.echo(
                f"{path.name}: failed ({session.failure_reason}); excluded", err=True
            )
            continue
        traces.append(session.score_trace)
        click.echo(
            f"{path.name}: best={max(session.score_trace.scores):.4f} "
            f"at iteration {session.best_index}"
        )

    if not traces:
        raise click.ClickException("every clip failed; nothing to aggregate")

    curves = aggregate_curves(traces)
    stats = corpus_stats(traces)
    (out / "curves.tsv").write_text(curves_table(curves), encoding="utf-8")
    trace_lines = [
        "\t".join([t.clip_id] + [repr(s) for s in t.scores]) for t in traces
    ]
    (out / "traces.tsv").write_text("\n".join(trace_lines) + "\n", encoding="utf-8")
    stats_doc = {
        "n_clips": stats.n_clips,
        "improved_fraction": stats.improved_fraction,
        "mean_initial": stats.mean_initial,
        "mean_peak": stats.mean_peak,
        "mean_improvement": stats.mean_improvement,
        "mean_best_iteration": stats.mean_best_iteration,
        "final_iteration_mean": stats.final_iteration_mean,
    }
    (out / "stats.json").write_text(json.dumps(stats_doc, indent=1), encoding="utf-8")
    click.echo(json.dumps(stats_doc, indent=1))


@main.command("make-corpus")
@click.option("--n", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--duration", default=world.DEFAULT_DURATION, show_default=True)
@click.option("--fps", default=world.DEFAULT_FPS, show_default=True)
@click.option("--width", default=world.DEFAULT_WIDTH, show_default=True)
@click.option("--height", default=world.DEFAULT_HEIGHT, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def make_corpus(
    n: int, seed: int, duration: float, fps: float, width: int, height: int, out: Path
) -> None:
    """Synthesize a seeded corpus of sceneclip files for offline evaluation."""
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n):
        scn = world.random_scene(rng)
        data = encode_scene_clip(scn, duration, fps, width, height)
        (out / f"clip_{i:03d}.json").write_bytes(data)
    click.echo(f"wrote {n} clips to {out}")


@main.command()
@click.option("--port", default=8008, show_default=True, envvar="PORT")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default="./data", show_default=True, envvar="DATA_DIR", type=click.Path(file_okay=False, path_type=Path))
@click.option("--adapter", type=click.Choice(["sim", "remote"]), default="sim", show_default=True)
@click.option("--workers", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--media", "media_policy", type=click.Choice(["auto", "sim", "external"]), default="auto", show_default=True)
@click.option("--ui-dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Static frontend build to serve at /.")
@_sim_options
@_remote_options
def serve(
    port: int,
    host: str,
    data_dir: Path,
    adapter: str,
    workers: int,
    seed: int,
    media_policy: str,
    ui_dir: Path | None,
    init_errors: int,
    fix_per_iter: int,
    p_drift: float,
    endpoint: str | None,
    credential_env: str | None,
    timeout: float,
    max_retries: int,
) -> None:
    """Serve the HTTP API with background job workers."""
    import uvicorn

    from .service.api import create_app
    from .service.core import Service, ServiceConfig

    remote = None
    if adapter == "remote":
        if not endpoint or not credential_env:
            raise click.UsageError(
                "--adapter remote requires --endpoint and --credential-env"
            )
        remote = AdapterConfig(
            kind="remote",
            endpoint=endpoint,
            credential_ref=credential_env,
            timeout=timeout,
            max_retries=max_retries,
        )
    config = ServiceConfig(
        data_dir=data_dir,
        adapter=adapter,
        seed=seed,
        sim_params=_sim_params(seed, init_errors, fix_per_iter, p_drift),
        remote=remote,
        workers=workers,
        media_policy=media_policy,
        ui_dir=ui_dir,
    )
    try:
        service = Service(config)
    except ClipscriptError as exc:
        raise click.ClickException(f"startup refused: {exc}") from exc
    app = create_app(service)
    service.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        service.stop()


if __name__ == "__main__":
    main()
