"""Command-line entry point: ``guicrop <subcommand> ...``.

Exit codes: 0 success, 2 I/O error, 3 malformed input, 4 agent protocol
violation, 5 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

from PIL import UnidentifiedImageError

from .agentwire import SubprocessAgent, serve
from .budget import STANDARD_SIZES, scaling_probe
from .config import RunConfig, load_config
from .crop import ISCConfig, isc_pipeline
from .edges import EdgeConfig, InfoMatrix, detect_information
from .errors import ConfigError, GuiCropError, ProtocolError
from .imaging import PixelImage
from .spectral import entropy_report
from .srdl import PerformanceHistory, Screen, TemplateAugmenter, run_srdl
from .synth import KINDS, PROFILES, GroundTruth, OracleAgent, ScreenSpec, write_screen
from .synth import DriftingAgent, NoisyAgent

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_PROTOCOL, EXIT_CONFIG = 0, 2, 3, 4, 5

log = logging.getLogger("guicrop")


class InputError(GuiCropError):
    """An input file exists but cannot be decoded."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ helpers


def load_image(path) -> PixelImage:
    try:
        return PixelImage.from_png(path)
    except UnidentifiedImageError as exc:
        raise InputError(f"{path}: not a decodable image ({exc})") from None
    except (ValueError, SyntaxError) as exc:
        raise InputError(f"{path}: {exc}") from None


def load_matrix(path) -> InfoMatrix | None:
    """The information matrix stored in a ``.pbm`` file; None for other suffixes."""
    path = Path(path)
    if path.suffix.lower() == ".pbm":
        data = path.read_bytes()
        try:
            return InfoMatrix.from_pbm(data)
        except ValueError as exc:
            raise InputError(f"{path}: malformed PBM ({exc})") from None
    return None


def _emit(text: str, output) -> None:
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _map(fn, items, jobs: int):
    """Apply ``fn`` to every item, in parallel if asked; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(p, groups) -> None:
    g = p.add_argument_group("configuration (overrides the config file)")
    for cls in groups:
        for f in fields(cls):
            default = f.default
            if isinstance(default, bool):
                g.add_argument(_flag(f.name), dest=f.name, default=None,
                               action=argparse.BooleanOptionalAction)
            else:
                g.add_argument(_flag(f.name), dest=f.name, default=None, type=type(default),
                               metavar=f.name.upper())


def _loop_flags(p) -> None:
    g = p.add_argument_group("dual loop")
    g.add_argument("--tau", type=float, default=None)
    g.add_argument("--max-iters", dest="max_iters", type=int, default=None)


def _budget_flags(p) -> None:
    g = p.add_argument_group("token budget")
    g.add_argument("--patch-size", dest="patch_size", type=int, default=None)
    g.add_argument("--attn-heads", dest="attn_heads", type=int, default=None)
    g.add_argument("--head-dim", dest="head_dim", type=int, default=None)


def _common(p, *, jobs=False, out_dir=True) -> None:
    p.add_argument("--config", default=None, help="flat JSON config (default: $ISC_CONFIG)")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    if out_dir:
        p.add_argument("-o", "--out-dir", dest="out_dir", default=None)
    if jobs:
        p.add_argument("-j", "--jobs", type=int, default=1, help="files processed in parallel")


_OVERRIDE_KEYS = ({f.name for f in fields(EdgeConfig)} | {f.name for f in fields(ISCConfig)}
                  | {"tau", "max_iters", "patch_size", "attn_heads", "head_dim",
                     "seed", "h_min", "out_dir"})


def _config(args) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k in _OVERRIDE_KEYS}
    return load_config(args.config, overrides)


# ---------------------------------------------------------------- commands


def cmd_edges(args) -> int:
    cfg = _config(args)
    out_dir = Path(cfg.out_dir or ".")

    def one(path):
        info = detect_information(load_image(path), cfg.edge)
        stem = Path(path).stem
        out_dir.mkdir(parents=True, exist_ok=True)
        info.write_pbm(out_dir / f"{stem}.pbm")
        stats = {"ones": info.ones(), "density": info.density(), "dims": [info.rows, info.cols]}
        (out_dir / f"{stem}.json").write_text(json.dumps(stats) + "\n")
        return stats

    stats = _map(one, args.inputs, args.jobs)
    _emit("".join(json.dumps({"image": str(p), **s}) + "\n" for p, s in zip(args.inputs, stats)),
          None)
    return EXIT_OK


def cmd_crop(args) -> int:
    cfg = _config(args)
    single_stdout = args.dry_run and cfg.out_dir is None

    def one(path):
        manifest = isc_pipeline(load_image(path), cfg.edge, cfg.isc, source_path=path)
        if single_stdout:
            return manifest.to_json() + "\n"
        manifest.write(Path(cfg.out_dir or "."), Path(path).stem, images=not args.dry_run)
        return None

    results = _map(one, args.inputs, args.jobs)
    if single_stdout:
        _emit("".join(results), None)
    return EXIT_OK


def cmd_entropy(args) -> int:
    cfg = _config(args)

    def one(path):
        m = load_matrix(path)
        if m is None:
            m = detect_information(load_image(path), cfg.edge)
        return entropy_report(m, cfg.h_min).to_json(str(path)) + "\n"

    _emit("".join(_map(one, args.inputs, args.jobs)), args.output)
    return EXIT_OK


def _load_corpus(corpus_dir: Path, need_truth: bool):
    if not corpus_dir.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {corpus_dir}")
    screens, truths = [], {}
    for png in sorted(corpus_dir.glob("*.png")):
        screens.append(Screen(png.stem, load_image(png), str(png)))
        gt_path = png.with_suffix(".json")
        if gt_path.exists():
            try:
                truths[png.stem] = GroundTruth.from_dict(json.loads(gt_path.read_text()))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{gt_path}: malformed ground truth ({exc})") from None
        elif need_truth:
            raise InputError(f"{png}: oracle agents need ground truth {gt_path.name}")
    if not screens:
        raise InputError(f"no PNG screens in {corpus_dir}")
    return screens, truths


def _oracle(kind: str, truths, args):
    if kind == "perfect":
        return OracleAgent(truths)
    if kind == "noisy":
        return NoisyAgent(truths, args.jitter, args.seed or 0)
    if kind == "drift":
        return DriftingAgent(truths, args.drift)
    raise ConfigError(f"unknown agent kind {kind!r}")


def cmd_srdl(args) -> int:
    cfg = _config(args)
    oracle = args.agent != "cmd"
    if not oracle and not args.agent_cmd:
        raise ConfigError("--agent cmd requires --agent-cmd")
    screens, truths = _load_corpus(Path(args.corpus_dir), oracle)
    history = None
    if args.history:
        try:
            history = PerformanceHistory.from_jsonl(Path(args.history).read_text())
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.history}: malformed history ({exc})") from None
    agent = _oracle(args.agent, truths, args) if oracle else SubprocessAgent(args.agent_cmd)
    try:
        run = run_srdl(screens, agent, cfg.h_min, cfg.loop, history=history,
                       augmenter=TemplateAugmenter(cfg.seed), n_variants=args.variants,
                       edge_cfg=cfg.edge, include_baseline=not args.no_baseline)
    finally:
        if not oracle:
            agent.close()
    _emit(run.annotations.to_jsonl(), args.output)
    summary = {"accepted": len(run.annotations.samples),
               "rejected": len(run.annotations.rejected), **run.counts()}
    print(json.dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    kinds = tuple(args.kinds.split(",")) if args.kinds else None
    try:
        spec = ScreenSpec(width=args.width, height=args.height, seed=cfg.seed,
                          element_count=args.element_count, density_profile=args.profile,
                          n_clusters=args.n_clusters, kinds=kinds)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out_dir = Path(cfg.out_dir or ".")
    _, gt = write_screen(spec, out_dir, args.stem)
    print(json.dumps({"png": str(out_dir / f"{args.stem}.png"), "elements": len(gt.elements),
                      "mask_ones": gt.info_mask.ones()}))
    return EXIT_OK


def _parse_size(text: str):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"size must look like WxH, got {text!r}") from None
    return w, h


def cmd_bench(args) -> int:
    cfg = _config(args)
    sizes = [_parse_size(s) for s in args.sizes.split(",")] if args.sizes else list(STANDARD_SIZES)
    try:
        report = scaling_probe(sizes, cfg.edge, cfg.isc, cfg.budget, args.repeats, cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out_dir = Path(cfg.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "bench.csv").write_text(report.to_csv())
    (out_dir / "bench.json").write_text(report.to_json() + "\n")
    print(report.to_json())
    return EXIT_OK


def cmd_agent(args) -> int:
    if not Path(args.truth_dir).is_dir():
        raise FileNotFoundError(f"truth directory not found: {args.truth_dir}")
    truths = {}
    for path in sorted(Path(args.truth_dir).glob("*.json")):
        try:
            truths[path.stem] = GroundTruth.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: malformed ground truth ({exc})") from None
    serve(_oracle(args.kind, truths, args))
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="guicrop", description="GUI screenshot cropping and self-annotation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("edges", help="detect the information matrix")
    p.add_argument("inputs", nargs="+")
    _common(p, jobs=True)
    _add_config_flags(p, [EdgeConfig])
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("crop", help="information-sensitive cropping")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--dry-run", action="store_true", help="manifest only, no PNGs")
    _common(p, jobs=True)
    _add_config_flags(p, [EdgeConfig, ISCConfig])
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("entropy", help="spectral entropy of screens or PBM matrices")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--h-min", dest="h_min", type=float, default=None)
    p.add_argument("--output", default=None, help="JSONL file (default stdout)")
    _common(p, jobs=True, out_dir=False)
    _add_config_flags(p, [EdgeConfig])
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("srdl", help="self-refining dual learning over a corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--agent", choices=("cmd", "perfect", "noisy", "drift"), default="perfect")
    p.add_argument("--agent-cmd", dest="agent_cmd", default=None)
    p.add_argument("--jitter", type=float, default=2.0, help="noisy agent jitter (px)")
    p.add_argument("--drift", type=float, default=64.0, help="drifting agent offset per call (px)")
    p.add_argument("--history", default=None, help="performance history JSONL")
    p.add_argument("--variants", type=int, default=2, help="augmented variants per failure")
    p.add_argument("--no-baseline", dest="no_baseline", action="store_true")
    p.add_argument("--h-min", dest="h_min", type=float, default=None)
    p.add_argument("--output", default=None, help="annotation JSONL (default stdout)")
    _common(p, out_dir=False)
    _loop_flags(p)
    _add_config_flags(p, [EdgeConfig])
    p.set_defaults(func=cmd_srdl)

    p = sub.add_parser("synth", help="render a synthetic screen with ground truth")
    p.add_argument("--width", type=int, default=1920)
    p.add_argument("--height", type=int, default=1080)
    p.add_argument("--element-count", dest="element_count", type=int, default=24)
    p.add_argument("--profile", choices=PROFILES, default="clustered")
    p.add_argument("--n-clusters", dest="n_clusters", type=int, default=5)
    p.add_argument("--kinds", default=None, help=f"comma list from {','.join(KINDS)}")
    p.add_argument("--stem", default="screen")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="latency scaling probe and token budget")
    p.add_argument("--sizes", default=None, help="comma list of WxH (default 480p..1440p)")
    p.add_argument("--repeats", type=int, default=3)
    _common(p)
    _add_config_flags(p, [EdgeConfig, ISCConfig])
    _budget_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("agent", help="serve an oracle agent over stdio JSON lines")
    p.add_argument("truth_dir", help="directory of ground-truth JSON files")
    p.add_argument("--kind", choices=("perfect", "noisy", "drift"), default="perfect")
    p.add_argument("--jitter", type=float, default=2.0)
    p.add_argument("--drift", type=float, default=64.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_agent)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"agent protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except InputError as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GuiCropError, ValueError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
