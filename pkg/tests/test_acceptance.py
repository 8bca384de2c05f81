"""Acceptance suite.

One test per acceptance criterion, each enforcing its stated tolerance and
runtime budget and printing a ``PASS <criterion> (<seconds>)`` line (run with
``pytest tests/test_acceptance.py -v -s`` to see them; pytest's own
PASSED/FAILED lines mirror the verdicts).
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import replace

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from clipscript import scene as world
from clipscript.adapters.simulation import SimulationParams, build_simulation_adapters
from clipscript.cli import main as cli_main
from clipscript.engine import fixed_iterations, resume, run_reconstruction
from clipscript.media import MediaService, encode_scene_clip
from clipscript.model import (
    EmbeddingVector,
    ScoreTrace,
    STATUS_CONVERGED,
    StoppingPolicy,
    earliest_argmax,
)
from clipscript.prompts import assist_starter, initial_instruction
from clipscript.rewrite import start_from_clip
from clipscript.service.api import create_app
from clipscript.service.core import Service, ServiceConfig
from clipscript.similarity import corpus_stats, cosine, frame_aligned_similarity

from .oracles import (
    naive_corpus_stats,
    naive_cosine,
    naive_paired_mean_cosine,
    naive_prefix_max,
)


class _Budget:
    def __init__(self, name: str, seconds: float | None):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is None:
            verdict = "PASS"
            if self.seconds is not None and elapsed > self.seconds:
                print(f"FAIL {self.name} ({elapsed:.2f}s > budget {self.seconds}s)")
                raise AssertionError(
                    f"{self.name}: runtime {elapsed:.2f}s exceeds budget {self.seconds}s"
                )
            print(f"{verdict} {self.name} ({elapsed:.2f}s)")
        else:
            print(f"FAIL {self.name} ({elapsed:.2f}s)")
        return False


def test_similarity_kernel_correctness(tmp_path):
    """cosine and frame_aligned_similarity vs naive-loop oracles (1e-9);
    identical clips score 1.0 +- 1e-6; under 10 s."""
    with _Budget("similarity-kernel-correctness", 10.0):
        rng = np.random.default_rng(2024)

        # 1,000 randomized vector pairs against the naive loop.
        for _ in range(1000):
            dim = int(rng.integers(2, 513))
            u = rng.standard_normal(dim)
            v = rng.standard_normal(dim)
            got = cosine(
                EmbeddingVector(u, dimension=dim), EmbeddingVector(v, dimension=dim)
            ).value
            assert abs(got - max(-1.0, min(1.0, naive_cosine(u, v)))) <= 1e-9

        # Randomized sim-rendered clip pairs against a naive frame-by-frame loop.
        media = MediaService(tmp_path / "m")
        adapters = build_simulation_adapters(
            media, SimulationParams(seed=7, frame_width=32, frame_height=32)
        )
        from clipscript.similarity import sample_frames

        for pair in range(60):
            a = media.put_scene_clip(world.random_scene(rng), width=32, height=32)
            b = media.put_scene_clip(world.random_scene(rng), width=32, height=32)
            n = int(rng.integers(1, 9))
            got = frame_aligned_similarity(a, b, adapters.embedder, n, media=media).value
            embeds_a = [
                adapters.embedder.embed(f).components
                for f in sample_frames(a, n, media=media)
            ]
            embeds_b = [
                adapters.embedder.embed(f).components
                for f in sample_frames(b, n, media=media)
            ]
            want = naive_paired_mean_cosine(embeds_a, embeds_b)
            assert abs(got - max(-1.0, min(1.0, want))) <= 1e-9

        # Identical clips score 1.0 +- 1e-6 for several n.
        clip = media.put_scene_clip(world.random_scene(rng), width=32, height=32)
        for n in (1, 4, 16):
            score = frame_aligned_similarity(
                clip, clip, adapters.embedder, n, media=media
            ).value
            assert abs(score - 1.0) <= 1e-6


def test_curve_semantics_fig1_shape(tmp_path):
    """30-clip simulated corpus, 10 iterations, drift enabled, through the
    eval CLI: best-so-far mean monotone; per-iteration mean strictly below it
    at iteration 10; per-trace prefix-max equals the oracle exactly."""
    with _Budget("curve-semantics-fig1-shape", 60.0):
        runner = CliRunner()
        corpus = tmp_path / "corpus"
        out = tmp_path / "eval"
        result = runner.invoke(
            cli_main,
            ["make-corpus", "--n", "30", "--seed", "1", "--out", str(corpus)],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        result = runner.invoke(
            cli_main,
            [
                "eval", str(corpus),
                "--iterations", "10",
                "--seed", "5",
                "--p-drift", "0.5",
                "--out", str(out),
            ],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output

        rows = (out / "curves.tsv").read_text().strip().split("\n")
        assert rows[0] == "iteration\tper_iteration_mean\tbest_so_far_mean"
        per_iter = [float(r.split("\t")[1]) for r in rows[1:]]
        best = [float(r.split("\t")[2]) for r in rows[1:]]
        assert len(per_iter) == 10

        # best-so-far mean is monotone non-decreasing at every step
        for a, b in zip(best, best[1:]):
            assert b >= a

        # drift pulls the uniform-iteration mean strictly below at iteration 10
        assert per_iter[9] < best[9]

        # per-trace prefix maxima equal the brute-force oracle exactly
        trace_rows = (out / "traces.tsv").read_text().strip().split("\n")
        assert len(trace_rows) == 30
        traces = [[float(x) for x in row.split("\t")[1:]] for row in trace_rows]
        from clipscript.similarity import best_so_far as fast_prefix

        for scores in traces:
            fast = fast_prefix(ScoreTrace("t", tuple(scores)))
            assert fast == naive_prefix_max(scores)

        # and the published curves are the means of those traces
        mean_best = [
            sum(naive_prefix_max(t)[i] for t in traces) / len(traces) for i in range(10)
        ]
        assert best == pytest.approx(mean_best, abs=1e-12)


def test_convergence_behavior(tmp_path):
    """Default simulation parameters: at least 90% of 30 seeded runs peak
    within iterations 3-5 and early-stop (patience 2) within peak + 2."""
    with _Budget("convergence-behavior", 60.0):
        media = MediaService(tmp_path / "m")
        rng = np.random.default_rng(42)
        hits = 0
        runs = 30
        for i in range(runs):
            params = SimulationParams(
                seed=1000 + i, frame_width=32, frame_height=32
            )  # init_errors=3, fix_per_iter=2, p_drift=0 defaults
            assert (params.init_errors, params.fix_per_iter, params.p_drift) == (3, 2, 0.0)
            adapters = build_simulation_adapters(media, params)
            clip = media.put_scene_clip(world.random_scene(rng), width=32, height=32)
            session = run_reconstruction(
                clip,
                adapters,
                StoppingPolicy(max_iterations=10, patience=2),
                frames_per_clip=8,
            )
            scores = [r.score.value for r in session.records]
            peak = earliest_argmax(scores)
            stopped_within = (
                session.status == STATUS_CONVERGED
                and len(scores) <= peak + 2
            )
            if 3 <= peak <= 5 and stopped_within:
                hits += 1
        assert hits / runs >= 0.90, f"only {hits}/{runs} runs converged as expected"


def test_stats_arithmetic_oracle():
    """corpus_stats matches a brute-force reimplementation to 1e-12 on
    randomized traces; the published-means fixture reports 0.0135."""
    with _Budget("stats-arithmetic-oracle", None):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n_traces = int(rng.integers(1, 12))
            length = int(rng.integers(1, 12))
            traces = [
                [float(x) for x in rng.uniform(-1, 1, length)] for _ in range(n_traces)
            ]
            stats = corpus_stats(
                [ScoreTrace(f"t{i}", tuple(t)) for i, t in enumerate(traces)]
            )
            ref = naive_corpus_stats(traces)
            assert stats.n_clips == ref["n_clips"]
            assert abs(stats.improved_fraction - ref["improved_fraction"]) <= 1e-12
            assert abs(stats.mean_initial - ref["mean_initial"]) <= 1e-12
            assert abs(stats.mean_peak - ref["mean_peak"]) <= 1e-12
            assert abs(stats.mean_improvement - ref["mean_improvement"]) <= 1e-12
            assert abs(stats.mean_best_iteration - ref["mean_best_iteration"]) <= 1e-12
            assert abs(stats.final_iteration_mean - ref["final_iteration_mean"]) <= 1e-12

        fixture = [ScoreTrace(f"c{i}", (0.9010, 0.9145, 0.9100)) for i in range(30)]
        stats = corpus_stats(fixture)
        assert abs(stats.mean_initial - 0.9010) <= 1e-12
        assert abs(stats.mean_peak - 0.9145) <= 1e-12
        assert abs(stats.mean_improvement - 0.0135) <= 1e-12


def test_engine_contracts(tmp_path):
    """200 randomized simulated runs: comparator called exactly records - 1
    times; best_index is the earliest argmax; best-so-far monotone; resume
    after an interrupt reproduces the uninterrupted trace byte for byte."""
    with _Budget("engine-contracts", None):
        media = MediaService(tmp_path / "m")
        rng = np.random.default_rng(123)

        class Counting:
            def __init__(self, inner):
                self.inner = inner
                self.compare_calls = 0
                self.generate_calls = 0

            def __getattr__(self, name):
                return getattr(self.inner, name)

            @property
            def generator(self):
                outer = self

                class _G:
                    def generate(self, prompt, frame):
                        outer.generate_calls += 1
                        return outer.inner.generator.generate(prompt, frame)

                return _G()

            @property
            def comparator(self):
                outer = self

                class _C:
                    def compare(self, original, generated, current):
                        outer.compare_calls += 1
                        return outer.inner.comparator.compare(
                            original, generated, current
                        )

                return _C()

        for run in range(200):
            params = SimulationParams(
                seed=int(rng.integers(1_000_000_000)),
                init_errors=int(rng.integers(0, 9)),
                fix_per_iter=int(rng.integers(1, 4)),
                p_drift=float(rng.choice([0.0, 0.5, 1.0])),
                frame_width=24,
                frame_height=24,
            )
            adapters = Counting(build_simulation_adapters(media, params))
            clip = media.put_scene_clip(world.random_scene(rng), width=24, height=24)
            policy = StoppingPolicy(
                max_iterations=int(rng.integers(1, 11)),
                patience=int(rng.integers(0, 4)),
            )
            counter = itertools.count()
            session = run_reconstruction(
                clip,
                adapters,
                policy,
                frames_per_clip=4,
                clock=lambda: float(next(counter)),
            )
            scores = [r.score.value for r in session.records]

            assert adapters.generate_calls == len(scores)
            assert adapters.compare_calls == len(scores) - 1
            assert session.best_index == earliest_argmax(scores)
            prefix = naive_prefix_max(scores)
            assert all(b >= a for a, b in zip(prefix, prefix[1:]))

            if len(scores) >= 2:
                cut = int(rng.integers(1, len(scores)))
                records = session.records[:cut]
                partial = replace(
                    session,
                    records=records,
                    best_index=earliest_argmax([r.score.value for r in records]),
                    status="running",
                    failure_reason=None,
                )
                resumed = resume(
                    partial,
                    adapters,
                    policy,
                    frames_per_clip=4,
                    clock=lambda: float(next(counter)),
                )
                assert [r.score.value for r in resumed.records] == scores
                assert resumed.status == session.status
                assert resumed.best_index == session.best_index


def test_template_fidelity():
    """Initialization instruction and assist starter equal the verbatim
    templates after placeholder substitution (exact string equality)."""
    with _Budget("template-fidelity", None):
        assert initial_instruction(8.0) == (
            "Reverse engineer the 8.0 second video to create a clear and "
            "descriptive prompt that can be used to reproduce the video with a "
            "text-to-video model. Return the prompt only. Include temporal "
            "sequencing."
        )
        assert initial_instruction(5.0) == (
            "Reverse engineer the 5.0 second video to create a clear and "
            "descriptive prompt that can be used to reproduce the video with a "
            "text-to-video model. Return the prompt only. Include temporal "
            "sequencing."
        )
        assert assist_starter("make it a watercolor dream", "a fox runs at dawn") == (
            "I want to repurpose my video. My goal is to make it a watercolor "
            "dream. Here is the text-to-video prompt of my original video: "
            "a fox runs at dawn. Help me rewrite the prompt…"
        )


def test_probe_configuration(tmp_path):
    """start_from_clip runs exactly 6 iterations regardless of convergence;
    the reconstruct CLI with --max-iters 10 --patience 0 runs exactly 10."""
    with _Budget("probe-configuration", None):
        media = MediaService(tmp_path / "m")
        adapters = build_simulation_adapters(media, SimulationParams(seed=3))
        scn = world.random_scene(np.random.default_rng(5))
        clip = media.put_scene_clip(scn)

        seen = []
        start_from_clip(clip, adapters, progress_sink=lambda r: seen.append(r.index))
        assert seen == [1, 2, 3, 4, 5, 6]  # converges by 3, still runs 6

        clip_path = tmp_path / "clip.json"
        clip_path.write_bytes(encode_scene_clip(scn))
        out = tmp_path / "out"
        result = CliRunner().invoke(
            cli_main,
            [
                "reconstruct", str(clip_path),
                "--max-iters", "10", "--patience", "0",
                "--seed", "3", "--out", str(out),
            ],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        session = json.loads((out / "session.json").read_text())
        assert len(session["records"]) == 10


def test_service_end_to_end(tmp_path):
    """Upload, reconstruct, rewrite, assist, first-frame edit, generate twice,
    compare — all on the simulation adapter — surviving a mid-run process
    restart, in under 2 minutes."""
    with _Budget("service-end-to-end", 120.0):
        config = ServiceConfig(
            data_dir=tmp_path / "data",
            adapter="sim",
            sim_params=SimulationParams(seed=5),
            workers=1,
        )
        scn = world.random_scene(np.random.default_rng(77))

        def wait(predicate, timeout=60.0):
            deadline = time.time() + timeout
            while time.time() < deadline:
                if predicate():
                    return True
                time.sleep(0.03)
            return False

        # Phase 1: upload and start the rewrite, then kill mid-run.
        service = Service(config)
        client = TestClient(create_app(service))
        data = encode_scene_clip(scn)
        resp = client.post("/clips", files={"file": ("c.json", data, "application/json")})
        assert resp.status_code == 201
        clip_id = resp.json()["id"]
        assert client.post(
            "/clips", files={"file": ("c.json", data, "application/json")}
        ).json()["id"] == clip_id  # content addressing

        resp = client.post("/rewrites", json={"clip_id": clip_id})
        assert resp.status_code == 202
        rewrite_id = resp.json()["id"]
        job_id = resp.json()["job"]["id"]
        recon_id = f"recon-{rewrite_id}"

        # Deterministic mid-run "death": shutdown is requested the moment the
        # second record persists, so the next checkpoint interrupts the job.
        original_save = service.sessions.save_reconstruction

        def tripwire(session):
            original_save(session)
            if len(session.records) == 2:
                service.runner.request_stop()

        service.sessions.save_reconstruction = tripwire
        service.start()
        assert wait(lambda: service.runner.stopping), "tripwire never fired"
        service.stop()  # graceful: current iteration finishes, job left running
        assert service.jobs.load(job_id).state == "running"
        interrupted_at = len(service.sessions.load_raw(recon_id)["records"])
        assert interrupted_at == 2

        # Phase 2: a fresh process on the same data dir picks the job up.
        service = Service(config)
        client = TestClient(create_app(service))
        service.start()
        try:
            assert wait(lambda: service.jobs.load(job_id).state == "done")

            state = client.get(f"/rewrites/{rewrite_id}").json()
            recon = state["reconstruction"]
            assert len(recon["records"]) == 6  # probe configuration, uninterrupted
            working = state["session"]["working_prompt"]["text"]

            # The resumed run matches a never-interrupted reference run.
            ref_media = MediaService(tmp_path / "ref")
            ref_adapters = build_simulation_adapters(ref_media, SimulationParams(seed=5))
            ref_clip = ref_media.ingest_clip(data)
            reference = fixed_iterations(ref_clip, ref_adapters, 6)
            assert [r["score"] for r in recon["records"]] == [
                r.score.value for r in reference.records
            ]
            assert working == reference.best_prompt.text

            # Rewrite phase: direct edit.
            resp = client.put(
                f"/rewrites/{rewrite_id}/prompt",
                json={"text": "subject: robot\nstyle: anime"},
            )
            assert resp.status_code == 200

            # Assist with the scaffolded starter message.
            resp = client.post(
                f"/rewrites/{rewrite_id}/assist", json={"goal": "lighting: neon"}
            )
            assist_job = resp.json()["job"]["id"]
            assert wait(lambda: service.jobs.load(assist_job).state == "done")
            chat = client.get(f"/rewrites/{rewrite_id}").json()["session"]["chat"]
            assert chat[0]["text"] == assist_starter(
                "lighting: neon", "subject: robot\nstyle: anime"
            )
            assert chat[1]["role"] == "assistant"

            # First-frame edit.
            resp = client.post(
                f"/rewrites/{rewrite_id}/first-frame", json={"goal": "style: vhs"}
            )
            ff_job = resp.json()["job"]["id"]
            assert wait(lambda: service.jobs.load(ff_job).state == "done")

            # Generate twice.
            for _ in range(2):
                resp = client.post(f"/rewrites/{rewrite_id}/versions")
                vjob = resp.json()["job"]["id"]
                assert wait(lambda: service.jobs.load(vjob).state == "done")

            versions = client.get(f"/rewrites/{rewrite_id}/versions").json()["versions"]
            assert [v["version_index"] for v in versions] == [1, 2]
            for v in versions:
                assert v["prompt_snapshot"]["text"] == "subject: robot\nstyle: anime"
                # media written before index
                assert client.get(f"/media/{v['clip']['media_ref']}").status_code == 200
                assert client.get(f"/media/{v['first_frame_ref']}").status_code == 200

            compared = client.get(
                f"/rewrites/{rewrite_id}/versions/1/compare/2"
            ).json()
            assert compared["a"]["prompt_snapshot"] == compared["b"]["prompt_snapshot"]

            # Persistence round trip: reload the session object and re-check
            # the core invariants on the typed model.
            session_obj = service.sessions.load_rewrite(rewrite_id)
            assert [v.version_index for v in session_obj.versions] == [1, 2]
            assert session_obj.working_prompt.text == "subject: robot\nstyle: anime"
            assert session_obj.frame_history  # the pre-edit frame is recoverable
        finally:
            service.stop()
