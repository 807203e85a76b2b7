"""``gmtraj`` command line: train | predict | eval | render | verify.

Every run directory holds ``config.yaml`` and ``manifest.json``; the
manifest lists each artifact with its sha256, and every artifact embeds the
config fingerprint so ``verify`` can re-check a run after the fact.

Exit codes: 0 success, 1 runtime failure, 2 usage, config or input error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .evaluation import (
    VARIANTS,
    MetricReport,
    build_report,
    dynamic_map_experiment,
    preliminary,
    refine_scene,
    run_benchmark,
    train_fold,
)
from .gmap import extract_local, render_map
from .ingest import IngestError, load_scene_dir
from .model import BGMNetwork
from .nn import CheckpointError
from .pipeline import SceneData, prepare_scene, stack_samples
from .render import render_sample
from .social import NeighborSet, build_energy_field, displacement

log = logging.getLogger("gmtraj")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags, config or inputs; maps to exit code 2."""


# ---------------------------------------------------------------------------
# run directory bookkeeping


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunDir:
    """Output directory with ``config.yaml`` and an artifact manifest."""

    def __init__(self, root: Path, cfg: RunConfig):
        self.root = Path(root)
        self.cfg = cfg
        self.fingerprint = cfg.fingerprint()
        self.manifest_path = self.root / "manifest.json"
        self.manifest = {"fingerprint": self.fingerprint, "config": cfg.to_dict(), "artifacts": {}, "data": {}}
        if self.manifest_path.exists():
            old = json.loads(self.manifest_path.read_text())
            if old.get("fingerprint") != self.fingerprint:
                raise UsageError(
                    f"{self.root} holds a run with config {str(old.get('fingerprint'))[:12]}, "
                    f"not {self.fingerprint[:12]}; choose another --out"
                )
            self.manifest["artifacts"] = old.get("artifacts", {})
            self.manifest["data"] = old.get("data", {})
        self.root.mkdir(parents=True, exist_ok=True)
        cfg.dump(self.root / "config.yaml")
        self.save()

    def path(self, *parts: str) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def register(self, path: Path, kind: str) -> None:
        rel = Path(path).relative_to(self.root).as_posix()
        self.manifest["artifacts"][rel] = {"kind": kind, "sha256": _sha256(Path(path))}

    def note_data(self, key: str, value) -> None:
        self.manifest["data"][key] = value

    def save(self) -> None:
        self.manifest["artifacts"] = dict(sorted(self.manifest["artifacts"].items()))
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# config and data


def _load_cfg(args) -> tuple[RunConfig, Path]:
    """Config plus the directory that relative data paths resolve against."""
    if args.config:
        cfg = load_config(args.config)
        base = Path(args.config).resolve().parent
    else:
        cfg = RunConfig()
        base = Path.cwd()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(train=dataclasses.replace(cfg.train, seed=args.seed))
    if getattr(args, "no_context", False) and args.command == "train":
        cfg = cfg.with_overrides(train=dataclasses.replace(cfg.train, use_context=False))
    return cfg, base


def _resolve(base: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _run_dir(args, cfg: RunConfig, base: Path) -> RunDir:
    return RunDir(Path(args.out) if args.out else _resolve(base, cfg.output), cfg)


class DataStore:
    """Lazily parsed recordings, prepared once per (scene, stride)."""

    def __init__(self, cfg: RunConfig, base: Path):
        self.cfg = cfg
        self.root = _resolve(base, cfg.data.root)
        if not self.root.is_dir():
            raise UsageError(f"dataset directory not found: {self.root}")
        self._scenes: dict[str, list] = {}
        self._prepared: dict[tuple[str, int], list[SceneData]] = {}

    def recordings(self, name: str):
        if name not in self._scenes:
            self._scenes[name] = load_scene_dir(self.root, [name], self.cfg.data.frame_interval_s)
        return self._scenes[name]

    def prepared(self, name: str, stride: int) -> list[SceneData]:
        key = (name, stride)
        if key not in self._prepared:
            c = self.cfg
            self._prepared[key] = [
                prepare_scene(sc, c.horizon, c.record_window, c.grid, stride) for sc in self.recordings(name)
            ]
        return self._prepared[key]

    def test(self, name: str) -> list[SceneData]:
        return self.prepared(name, self.cfg.data.test_stride)

    def train(self, name: str) -> list[SceneData]:
        return self.prepared(name, self.cfg.data.train_stride)

    def describe(self, name: str, stride: int) -> list[dict]:
        out = []
        for d in self.prepared(name, stride):
            out.append(
                {
                    "frame_step": d.scene.frame_step,
                    "frames": [int(d.scene.frame_range()[0]), int(d.scene.frame_range()[-1])],
                    "agents": len(d.scene.tracks),
                    "samples": len(d.samples),
                    "stride": stride,
                    "record_windows": [[w.window.frames[0], w.window.frames[-1], w.saved_at] for w in d.windows],
                }
            )
        return out


def _check_scene(cfg: RunConfig, name: str) -> None:
    if name not in cfg.data.scenes:
        raise UsageError(f"unknown scene {name!r}; configured scenes are {list(cfg.data.scenes)}")


def _load_network(path: Path, cfg: RunConfig) -> tuple[BGMNetwork, dict]:
    if not path.exists():
        raise UsageError(f"checkpoint not found: {path}")
    try:
        return BGMNetwork.load(path, expect=cfg.model)
    except (CheckpointError, KeyError) as exc:
        raise UsageError(f"unreadable checkpoint {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"checkpoint {path} does not fit the configured model: {exc}") from exc


def _write_losses(path: Path, losses: Sequence[float], fingerprint: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# fingerprint={fingerprint}\n")
        fh.write("epoch,loss\n")
        for e, l in enumerate(losses):
            fh.write(f"{e},{l!r}\n")


def _save_fold(run: RunDir, held: str, result, n_train: int) -> Path:
    ck = run.path("checkpoints", f"{held}.ckpt")
    meta = {"fingerprint": run.fingerprint, "held_out": held, "seed": run.cfg.train.seed, "train_samples": n_train}
    result.network.save(ck, meta)
    run.register(ck, "checkpoint")
    lp = run.path("losses", f"{held}.csv")
    _write_losses(lp, result.losses, run.fingerprint)
    run.register(lp, "losses")
    run.save()
    return ck


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg, base = _load_cfg(args)
    store = DataStore(cfg, base)
    scenes = list(cfg.data.scenes)
    if args.scene is None:
        folds = scenes if len(scenes) > 1 else ["none"]
    elif args.scene in ("all", "none"):
        folds = scenes if args.scene == "all" else ["none"]
    else:
        _check_scene(cfg, args.scene)
        folds = [args.scene]
    for name in scenes:
        store.train(name)  # parse everything up front so data errors surface before training
    run = _run_dir(args, cfg, base)
    for name in scenes:
        run.note_data(name, store.describe(name, cfg.data.train_stride))
    for held in folds:
        train_data = [d for n in scenes if n != held for d in store.train(n)]
        n = sum(len(d.samples) for d in train_data)
        if n == 0:
            raise UsageError(f"no training samples for fold {held!r}")
        label = "all" if held == "none" else held
        log.info("fold %s: %d training samples, %d epochs", label, n, cfg.train.epochs)

        def progress(epoch, loss, _n=n):
            if epoch % 10 == 0 or epoch == cfg.train.epochs - 1:
                log.info("  epoch %d  mean displacement %.4f m", epoch, loss / _n / cfg.model.t_pred)

        res = train_fold(train_data, cfg.model, cfg.train, progress)
        ck = _save_fold(run, label, res, n)
        print(f"{label}: checkpoint {ck}  final loss {res.losses[-1]:.6g}")
    return EXIT_OK


def _prediction_rows(net, data: SceneData, cfg: RunConfig, use_context: bool, social: bool):
    prelim = preliminary(net, data, use_context=use_context)
    final = refine_scene(data, prelim, cfg.social) if social else prelim
    return prelim, final


def _sample_field(data: SceneData, prelim: np.ndarray, k: int, cfg: RunConfig):
    obs, _ = stack_samples(data.samples)
    t1 = data.samples[k].t1
    group = [j for j, s in enumerate(data.samples) if s.t1 == t1 and j != k]
    nb = NeighborSet(
        tuple(data.samples[j].agent_id for j in group),
        tuple(prelim[j] for j in group),
        tuple(displacement(obs[j]) for j in group),
    )
    return build_energy_field(prelim[k], nb, cfg.social, observed=obs[k], owner=data.samples[k].agent_id)


def _render_samples(run: RunDir, data_list, prelims, finals, indices, scene: str, social: bool) -> list[Path]:
    flat = [(d, p, f, k) for d, p, f in zip(data_list, prelims, finals) for k in range(len(d.samples))]
    out = []
    for idx in indices:
        if not 0 <= idx < len(flat):
            raise UsageError(f"--sample {idx} out of range (0..{len(flat) - 1})")
        d, p, f, k = flat[idx]
        s = d.samples[k]
        fld = _sample_field(d, p, k, run.cfg)
        tracks = {"observed": s.observed, "truth": s.ground_truth, "preliminary": p[k]}
        if social:
            tracks["refined"] = f[k]
        path = run.path("renders", f"{scene}_sample{idx:05d}.png")
        meta = {"fingerprint": run.fingerprint, "scene": scene, "agent_id": str(s.agent_id), "t0": str(s.t0)}
        render_sample(path, fld.values, fld.spec, tracks, cell_px=4, meta=meta)
        run.register(path, "render")
        out.append(path)
    return out


def cmd_predict(args) -> int:
    cfg, base = _load_cfg(args)
    if not args.scene:
        raise UsageError("predict needs --scene")
    _check_scene(cfg, args.scene)
    store = DataStore(cfg, base)
    data_list = store.test(args.scene)
    run = _run_dir(args, cfg, base)
    ck = Path(args.checkpoint) if args.checkpoint else run.root / "checkpoints" / f"{args.scene}.ckpt"
    net, meta = _load_network(ck, cfg)
    social = not args.no_social
    path = run.path("predictions", f"{args.scene}.jsonl")
    prelims, finals = [], []
    n = 0
    with open(path, "w") as fh:
        for data in data_list:
            prelim, final = _prediction_rows(net, data, cfg, not args.no_context, social)
            prelims.append(prelim)
            finals.append(final)
            for k, s in enumerate(data.samples):
                row = {
                    "fingerprint": run.fingerprint,
                    "checkpoint_fingerprint": meta.get("fingerprint"),
                    "scene": s.scene,
                    "agent_id": s.agent_id,
                    "t0": s.t0,
                    "t1": s.t1,
                    "points": final[k].tolist(),
                    "preliminary": prelim[k].tolist(),
                    "social": social,
                    "context": not args.no_context,
                }
                fh.write(json.dumps(row) + "\n")
                n += 1
    run.register(path, "predictions")
    print(f"{n} predictions -> {path}")
    if args.render:
        for p in _render_samples(run, data_list, prelims, finals, args.sample or [0], args.scene, social):
            print(f"render -> {p}")
    run.save()
    return EXIT_OK


def _variants(args) -> list[str]:
    if args.ablations:
        return list(VARIANTS)
    chosen = []
    if args.no_social:
        chosen.append("no_social")
    if args.no_context:
        chosen.append("no_context")
    return chosen or ["full"]


def cmd_eval(args) -> int:
    cfg, base = _load_cfg(args)
    store = DataStore(cfg, base)
    run = _run_dir(args, cfg, base)
    scenes = list(cfg.data.scenes)
    if args.scene:
        _check_scene(cfg, args.scene)
    ck_dir = Path(args.checkpoint) if args.checkpoint else run.root / "checkpoints"
    networks = {}
    for name in scenes:
        ck = ck_dir / f"{name}.ckpt"
        if ck.exists():
            networks[name] = _load_network(ck, cfg)[0]
        elif not args.train_missing:
            raise UsageError(f"missing checkpoint for held-out scene {name!r}: {ck} (or pass --train-missing)")
    targets = [args.scene] if args.scene else scenes
    data_by_scene = {}
    for name in scenes:
        if name in targets:
            data_by_scene[name] = store.test(name)
            run.note_data(name, store.describe(name, cfg.data.test_stride))
    # folds that need training draw their training data at the training stride
    train_views = {n: store.train(n) for n in scenes} if args.train_missing else {}

    def on_trained(held, res):
        n = sum(len(d.samples) for m in scenes if m != held for d in train_views[m])
        _save_fold(run, held, res, n)

    missing = [n for n in targets if n not in networks]
    for held in missing:
        train_data = [d for n in scenes if n != held for d in train_views[n]]
        log.info("training fold %s on %d samples", held, sum(len(d.samples) for d in train_data))
        res = train_fold(train_data, cfg.model, cfg.train)
        on_trained(held, res)
        networks[held] = res.network

    variants = _variants(args)
    result = run_benchmark(
        data_by_scene, cfg.model, cfg.train, cfg.social, run.fingerprint,
        networks=networks, train_missing=False, variants=variants,
    )
    out = run.path("reports", "x").parent
    for rep in list(result.reports.values()) + [result.linear]:
        jp, cp = rep.write(out)
        run.register(jp, "report")
        run.register(cp, "samples")
        run.register(out / f"report_{rep.variant}.txt", "table")
    print(result.summary())

    if args.dynamic:
        name = cfg.eval.dynamic_scene
        _check_scene(cfg, name)
        if name not in networks:
            raise UsageError(f"--dynamic needs the {name!r} checkpoint")
        social = None if args.no_social else cfg.social
        dyn = dynamic_map_experiment(networks[name], store.test(name), social, cfg.eval.dynamic_min_samples)
        d = dyn.to_dict()
        d["fingerprint"] = run.fingerprint
        d["social"] = social is not None
        jp = out / "dynamic_map.json"
        jp.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
        tp = out / "dynamic_map.txt"
        tp.write_text(f"(config {run.fingerprint[:12]})\n" + dyn.table() + "\n")
        run.register(jp, "dynamic")
        run.register(tp, "table")
        print(dyn.table())
    run.save()
    return EXIT_OK


def cmd_render(args) -> int:
    cfg, base = _load_cfg(args)
    if not args.scene:
        raise UsageError("render needs --scene")
    _check_scene(cfg, args.scene)
    store = DataStore(cfg, base)
    data_list = store.test(args.scene)
    run = _run_dir(args, cfg, base)
    meta = {"fingerprint": run.fingerprint, "scene": args.scene}
    written = []
    if args.sample:
        ck = Path(args.checkpoint) if args.checkpoint else run.root / "checkpoints" / f"{args.scene}.ckpt"
        net, _ = _load_network(ck, cfg)
        prelims, finals = zip(*(_prediction_rows(net, d, cfg, not args.no_context, not args.no_social) for d in data_list))
        written += _render_samples(run, data_list, prelims, finals, args.sample, args.scene, not args.no_social)
    else:
        for r, data in enumerate(data_list):
            if not data.maps:
                log.warning("recording %d of %s saved no record window", r, args.scene)
                continue
            wins = range(len(data.maps)) if args.window is None else [args.window]
            for w in wins:
                if not -len(data.maps) <= w < len(data.maps):
                    raise UsageError(f"--window {w} out of range; recording {r} has {len(data.maps)} windows")
                w = w % len(data.maps)
                p = run.path("renders", f"{args.scene}_rec{r}_window{w:03d}.png")
                render_map(data.maps[w], p, cell_px=2, meta={**meta, "window": str(w)})
                run.register(p, "render")
                written.append(p)
            if args.local is not None and data.samples:
                k = args.local
                if not 0 <= k < len(data.samples):
                    raise UsageError(f"--local {k} out of range")
                wi = data.window_index[k]
                if wi is not None:
                    s = data.samples[k]
                    lm = extract_local(data.maps[wi], s.last_observed, cfg.grid.half_side, s.agent_id)
                    p = run.path("renders", f"{args.scene}_rec{r}_local{k:05d}.png")
                    render_map(lm, p, cell_px=8, meta={**meta, "sample": str(k)})
                    run.register(p, "render")
                    written.append(p)
    for p in written:
        print(f"render -> {p}")
    run.save()
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _embedded_fingerprint(path: Path, kind: str):
    """Fingerprint(s) stored inside an artifact, as a set."""
    if kind == "checkpoint":
        from .nn import load_tensors

        return {load_tensors(path)[1].get("fingerprint")}
    if kind in ("report", "dynamic"):
        return {json.loads(path.read_text()).get("fingerprint")}
    if kind in ("losses", "samples"):
        first = path.read_text().split("\n", 1)[0]
        return {first.split("=", 1)[1] if first.startswith("# fingerprint=") else None}
    if kind == "predictions":
        with open(path) as fh:
            return {json.loads(line).get("fingerprint") for line in fh if line.strip()}
    if kind == "render":
        from PIL import Image

        with Image.open(path) as im:
            return {im.text.get("fingerprint")}
    if kind == "table":
        first = path.read_text().split("\n", 1)[0]
        return {first[first.find("(config ") + 8: first.find(")")]} if "(config " in first else {None}
    return {None}


def verify_run(root: Path, expected: str | None = None) -> list[str]:
    """Problems found in the run directory ``root`` (empty when consistent)."""
    problems = []
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise UsageError(f"no manifest.json in {root}")
    manifest = json.loads(mpath.read_text())
    fp = manifest.get("fingerprint")
    try:
        cfg = load_config(root / "config.yaml")
    except ConfigError as exc:
        return [f"config.yaml: {exc}"]
    if cfg.fingerprint() != fp:
        problems.append(f"config.yaml hashes to {cfg.fingerprint()[:12]}, manifest says {str(fp)[:12]}")
    if RunConfig.from_dict(manifest.get("config")).fingerprint() != fp:
        problems.append("manifest config block does not hash to the manifest fingerprint")
    if expected is not None and expected != fp:
        problems.append(f"run was produced by config {str(fp)[:12]}, expected {expected[:12]}")
    for rel, info in manifest.get("artifacts", {}).items():
        path = root / rel
        if not path.exists():
            problems.append(f"{rel}: missing")
            continue
        if _sha256(path) != info.get("sha256"):
            problems.append(f"{rel}: content changed since it was recorded")
        kind = info.get("kind")
        try:
            got = _embedded_fingerprint(path, kind)
        except Exception as exc:  # unreadable artifact
            problems.append(f"{rel}: cannot read embedded fingerprint ({exc})")
            continue
        if kind == "table" and len(fp or "") >= 12:
            ok = got == {fp[:12]}
        else:
            ok = got == {fp}
        if not ok:
            problems.append(f"{rel}: embedded fingerprint {sorted(map(str, got))} != {str(fp)[:12]}")
        if kind == "report":
            problems.extend(_check_report(path, rel))
    return problems


def _check_report(jpath: Path, rel: str) -> list[str]:
    """Recompute a report's averages from its per-sample dump."""
    d = json.loads(jpath.read_text())
    cpath = jpath.with_name(jpath.stem + "_samples.csv")
    if not cpath.exists():
        return [f"{rel}: per-sample dump {cpath.name} missing"]
    rebuilt = build_report(d["variant"], MetricReport.read_samples(cpath), d["fingerprint"], list(d["per_scene"]))
    out = []
    for key in ("average", "weighted"):
        for m in ("ade", "fde"):
            if not np.isclose(rebuilt.to_dict()[key][m], d[key][m], rtol=0, atol=1e-12):
                out.append(f"{rel}: {key} {m} {d[key][m]} not reproducible from samples ({rebuilt.to_dict()[key][m]})")
    for name, m in d["per_scene"].items():
        got = rebuilt.per_scene.get(name)
        if got is None or got["n"] != m["n"] or abs(got["ade"] - m["ade"]) > 1e-12 or abs(got["fde"] - m["fde"]) > 1e-12:
            out.append(f"{rel}: scene {name} not reproducible from samples")
    return out


def cmd_verify(args) -> int:
    root = Path(args.out) if args.out else None
    expected = None
    if args.config:
        cfg, base = _load_cfg(args)
        expected = cfg.fingerprint()
        root = root or _resolve(base, cfg.output)
    if root is None:
        raise UsageError("verify needs --out DIR or --config")
    problems = verify_run(root, expected)
    n = len(json.loads((root / "manifest.json").read_text()).get("artifacts", {}))
    for p in problems:
        print(f"FAIL {p}")
    print(f"{n} artifacts checked, {len(problems)} problem(s)")
    return EXIT_OK if not problems else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmtraj", description="Guidance-map trajectory forecasting on ETH/UCY-style data.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", metavar="PATH", help="YAML run configuration (defaults if omitted)")
        sp.add_argument("--out", metavar="DIR", help="run directory (default: config 'output')")
        if seed:
            sp.add_argument("--seed", type=int, metavar="N", help="override train.seed")

    sp = sub.add_parser("train", help="train one leave-one-out fold (or all)")
    common(sp)
    sp.add_argument("--scene", metavar="NAME", help="held-out scene; 'all' for every fold, 'none' to train on everything")
    sp.add_argument("--no-context", action="store_true", help="train without the context branch")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="predict every test sample of one scene")
    common(sp)
    sp.add_argument("--scene", metavar="NAME", required=True)
    sp.add_argument("--checkpoint", metavar="PATH", help="default: <out>/checkpoints/<scene>.ckpt")
    sp.add_argument("--no-social", action="store_true", help="skip social refinement")
    sp.add_argument("--no-context", action="store_true", help="zero the context feature at inference")
    sp.add_argument("--render", action="store_true", help="render the samples chosen with --sample")
    sp.add_argument("--sample", type=int, action="append", metavar="K", help="sample index to render (repeatable, default 0)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("eval", help="leave-one-out ADE/FDE reports")
    common(sp)
    sp.add_argument("--scene", metavar="NAME", help="evaluate one held-out scene only")
    sp.add_argument("--checkpoint", metavar="DIR", help="directory of <scene>.ckpt files (default: <out>/checkpoints)")
    sp.add_argument("--no-social", action="store_true", help="report the variant without social refinement")
    sp.add_argument("--no-context", action="store_true", help="report the variant with a zeroed context feature")
    sp.add_argument("--ablations", action="store_true", help="report full, no_social and no_context")
    sp.add_argument("--train-missing", action="store_true", help="train folds that have no checkpoint")
    sp.add_argument("--dynamic", action="store_true", help="also run the record-period map swap experiment")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("render", help="render guidance maps or per-sample energy fields")
    common(sp)
    sp.add_argument("--scene", metavar="NAME", required=True)
    sp.add_argument("--window", type=int, metavar="K", help="saved window index (default: all)")
    sp.add_argument("--local", type=int, metavar="K", help="also render the local map of sample K")
    sp.add_argument("--sample", type=int, action="append", metavar="K", help="render the energy field and tracks of sample K")
    sp.add_argument("--checkpoint", metavar="PATH")
    sp.add_argument("--no-social", action="store_true")
    sp.add_argument("--no-context", action="store_true")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("verify", help="re-check fingerprints and hashes of a run directory")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, IngestError) as exc:
        print(f"gmtraj: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"gmtraj: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
