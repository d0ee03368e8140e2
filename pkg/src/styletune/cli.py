"""``styletune`` command line.

Every subcommand takes ``--config FILE.json`` plus flags; flags override file
values, and the fully resolved configuration is written to ``<out>/config.json``
so a run can be repeated from that file alone.

Exit codes: 0 ok, 1 verification failed, 2 bad configuration, 3 incompatible
or corrupt checkpoint, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import tempfile
import typing
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch

from . import checkpoint as ckpt_io
from .data import save_png, to_uint8
from .edit import EditSpec, attribute_direction, cross_apply, extrapolate, load_latent, save_latent
from .errors import ConfigError, StyletuneError
from .freeze import FreezePlan
from .generator import truncate
from .models import generator_from_checkpoint
from .swap import SwapPlan, diff, partition, swap, sweep_boundaries
from .train import RunConfig, finetune, generate_grid, generate_images, pretrain

log = logging.getLogger("styletune")

# dest -> (type, default, help) for the non-training subcommands
_COMMON = {"out": (str, None, "output directory")}
_SEEDS = {"seeds": (str, "0,1,2,3", "comma-separated z seeds")}
COMMANDS: Dict[str, Dict[str, tuple]] = {
    "swap": {
        "source": (str, None, "source checkpoint (low-resolution side)"),
        "target": (str, None, "target checkpoint (high-resolution side)"),
        "boundary": (int, None, "first resolution taken from the target"),
        "mapping_from": (str, "target", "which model supplies the mapping network"),
        **_COMMON,
    },
    "sweep-swap": {
        "source": (str, None, "source checkpoint"),
        "target": (str, None, "target checkpoint"),
        "mapping_from": (str, "target", "which model supplies the mapping network"),
        **_SEEDS,
        **_COMMON,
    },
    "generate": {
        "ckpt": (str, None, "generator checkpoint"),
        "truncation": (float, 1.0, "truncation psi (1 = off)"),
        **_SEEDS,
        **_COMMON,
    },
    "grid": {
        "ckpts": (str, None, "comma-separated checkpoints, one column each"),
        **_SEEDS,
        **_COMMON,
    },
    "edit": {
        "ckpt": (str, None, "target (fine-tuned) checkpoint"),
        "source_ckpt": (str, None, "source checkpoint; derives w_s and the toy edit direction"),
        "w_s": (str, None, "fixed latent file"),
        "w": (str, None, "edited latent file"),
        "alpha": (float, 2.0, "extrapolation strength"),
        "seed": (int, 0, "z seed for w_s when no latent file is given"),
        **_COMMON,
    },
    "verify": {
        "run": (str, None, "training run directory"),
        **_COMMON,
    },
}
TRAIN_COMMANDS = ("pretrain", "finetune")
REQUIRED = {
    "swap": ("source", "target", "boundary", "out"),
    "sweep-swap": ("source", "target", "out"),
    "generate": ("ckpt", "out"),
    "grid": ("ckpts", "out"),
    "edit": ("ckpt", "out"),
    "verify": ("run",),
    "pretrain": ("out",),
    "finetune": ("source", "out"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _flag(dest: str) -> str:
    return "--" + dest.replace("_", "-")


def _run_config_fields():
    hints = typing.get_type_hints(RunConfig)
    for f in dataclasses.fields(RunConfig):
        yield f.name, hints[f.name], f.default


def _base_type(hint):
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return args[0] if args else hint


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="styletune", description="Style-based GAN fine-tuning laboratory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in TRAIN_COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        for dest, hint, _ in _run_config_fields():
            if dest == "mode":
                continue
            t = _base_type(hint)
            if t is bool:
                p.add_argument(_flag(dest), dest=dest, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
            else:
                p.add_argument(_flag(dest), dest=dest, type=t, default=argparse.SUPPRESS)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        for dest, (t, _, help_) in opts.items():
            p.add_argument(_flag(dest), dest=dest, type=t, default=argparse.SUPPRESS, help=help_)
    return parser


def resolve(command: str, flags: dict, config_path: Optional[str]) -> dict:
    """defaults <- config file <- flags."""
    if command in TRAIN_COMMANDS:
        values = {d: default for d, _, default in _run_config_fields()}
        values["mode"] = command
    else:
        values = {d: spec[1] for d, spec in COMMANDS[command].items()}
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {config_path}: {e}") from None
        if loaded.pop("command", command) != command:
            raise ConfigError("config was written by another subcommand")
        unknown = set(loaded) - set(values)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if command in TRAIN_COMMANDS and loaded.get("mode", command) != command:
            raise ConfigError("config mode does not match subcommand")
        values.update(loaded)
    values.update(flags)
    missing = [d for d in REQUIRED[command] if values.get(d) in (None, "")]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(_flag(m) for m in missing)}")
    return values


def _seeds(text) -> List[int]:
    if isinstance(text, list):
        return [int(s) for s in text]
    try:
        return [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None


def _write_config(out: Path, command: str, values: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps({"command": command, **values}, indent=2))


def cmd_train(values: dict) -> int:
    cfg = RunConfig.from_dict(values)
    result = pretrain(cfg) if cfg.mode == "pretrain" else finetune(cfg)
    seeds = list(range(8))
    generate_grid([result.checkpoint], seeds, Path(cfg.out) / "grids" / "final.png")
    print(json.dumps({"out": cfg.out, "steps": cfg.steps, "last": result.log[-1]}))
    return 0


def cmd_swap(values: dict) -> int:
    out = Path(values["out"])
    _write_config(out, "swap", values)
    source, target = ckpt_io.load(values["source"]), ckpt_io.load(values["target"])
    plan = SwapPlan(values["boundary"], values["mapping_from"])
    result = swap(source, target, plan)
    ckpt_io.save(result, out / "swapped.ckpt")
    (out / "plan.json").write_text(plan.to_json())
    report = {"partition": partition(result.tensors, plan), "l2_to_target": diff(result, target)}
    (out / "diff.json").write_text(json.dumps(report, indent=1))
    n_src = sum(v == "source" for v in report["partition"].values())
    print(json.dumps({"out": str(out / "swapped.ckpt"), "source_tensors": n_src,
                      "target_tensors": len(report["partition"]) - n_src}))
    return 0


def cmd_sweep_swap(values: dict) -> int:
    out = Path(values["out"])
    _write_config(out, "sweep-swap", values)
    source, target = ckpt_io.load(values["source"]), ckpt_io.load(values["target"])
    seeds = _seeds(values["seeds"])
    max_res = target.config["generator"]["max_resolution"]
    for b in sweep_boundaries(max_res):
        swapped = swap(source, target, SwapPlan(b, values["mapping_from"]))
        ckpt_io.save(swapped, out / "swaps" / f"boundary_{b}.ckpt")
        generate_grid([source, target, swapped], seeds, out / "grids" / f"boundary_{b}.png")
        print(f"boundary {b}: grids/boundary_{b}.png")
    return 0


def cmd_generate(values: dict) -> int:
    out = Path(values["out"])
    _write_config(out, "generate", values)
    g = generator_from_checkpoint(ckpt_io.load(values["ckpt"]))
    seeds = _seeds(values["seeds"])
    psi = values["truncation"]
    with torch.no_grad():
        if psi == 1.0:
            images = generate_images(g, seeds)
        else:
            z = torch.cat([torch.randn(1, g.cfg.z_dim, generator=torch.Generator().manual_seed(s)) for s in seeds])
            images = g.synthesize(truncate(g.map_latent(z), g.mean_style(), psi)).image
    pix = to_uint8(images)
    for s, im in zip(seeds, pix):
        save_png(im, out / f"seed_{s}.png")
    print(json.dumps({"out": str(out), "images": len(seeds)}))
    return 0


def cmd_grid(values: dict) -> int:
    out = Path(values["out"])
    _write_config(out, "grid", values)
    ckpts = [ckpt_io.load(p) for p in str(values["ckpts"]).split(",") if p]
    grid = generate_grid(ckpts, _seeds(values["seeds"]), out / "grid.png")
    print(json.dumps({"out": str(out / "grid.png"), "shape": list(grid.shape)}))
    return 0


def cmd_edit(values: dict) -> int:
    out = Path(values["out"])
    _write_config(out, "edit", values)
    target = generator_from_checkpoint(ckpt_io.load(values["ckpt"]))
    source = generator_from_checkpoint(ckpt_io.load(values["source_ckpt"])) if values["source_ckpt"] else target
    with torch.no_grad():
        if values["w_s"]:
            w_s = load_latent(values["w_s"])
        else:
            z = torch.randn(1, source.cfg.z_dim, generator=torch.Generator().manual_seed(values["seed"]))
            w_s = source.map_latent(z)[0]
        if values["w"]:
            w = load_latent(values["w"])
        else:
            w = w_s + attribute_direction(source, seed=values["seed"])
    w_prime = extrapolate(EditSpec(w_s, w, values["alpha"]))
    save_latent(w_s, out / "w_s.lat")
    save_latent(w, out / "w.lat")
    save_latent(w_prime, out / "w_prime.lat")
    row = torch.cat([cross_apply(v, target).image for v in (w_s, w, w_prime)])
    strip = to_uint8(row)
    save_png(np.concatenate(list(strip), axis=1), out / "edit.png")
    print(json.dumps({"out": str(out / "edit.png"), "alpha": values["alpha"]}))
    return 0


def verify_run(run: Path) -> List[tuple]:
    """(check name, passed, detail) for the frozen-parameter, round-trip and swap-identity invariants."""
    results = []
    cfg = RunConfig.from_dict(json.loads((run / "config.json").read_text()))
    plan = FreezePlan.from_dict(json.loads((run / "plan.json").read_text()))
    snaps = sorted((run / "snapshots").glob("step_*.ckpt"), key=lambda p: int(p.name[5:-5]))
    first, last = ckpt_io.load(snaps[0]), ckpt_io.load(snaps[-1])

    moved = [n for n in plan.frozen_names if not torch.equal(first.tensors[n], last.tensors[n])]
    results.append(("frozen_parameters", not moved, f"{len(plan.frozen_names)} frozen, {len(moved)} changed"))

    with tempfile.TemporaryDirectory() as tmp:
        back = ckpt_io.load(ckpt_io.save(last, Path(tmp) / "rt.ckpt"))
    same = list(back.tensors) == list(last.tensors) and all(
        torch.equal(back.tensors[n].view(torch.int32), t.view(torch.int32)) for n, t in last.tensors.items()
    )
    results.append(("checkpoint_round_trip", same, f"{len(last.tensors)} tensors"))

    as_target = swap(first, last, SwapPlan(4, "target"))
    ok_t = all(torch.equal(as_target.tensors[n], last.tensors[n]) for n in last.tensors)
    as_source = swap(first, last, SwapPlan(2 * cfg.resolution, "source"))
    ok_s = all(torch.equal(as_source.tensors[n], first.tensors[n]) for n in first.tensors if not n.startswith("disc."))
    results.append(("swap_identity", ok_t and ok_s, f"boundary=4 -> final: {ok_t}; boundary={2 * cfg.resolution} -> initial: {ok_s}"))
    return results


def cmd_verify(values: dict) -> int:
    run = Path(values["run"])
    results = verify_run(run)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if values.get("out"):
        out = Path(values["out"])
        _write_config(out, "verify", values)
        (out / "verify.json").write_text(json.dumps([{"check": n, "pass": ok, "detail": d} for n, ok, d in results]))
    return 0 if all(ok for _, ok, _ in results) else 1


HANDLERS = {
    "swap": cmd_swap,
    "sweep-swap": cmd_sweep_swap,
    "generate": cmd_generate,
    "grid": cmd_grid,
    "edit": cmd_edit,
    "verify": cmd_verify,
}


def run(argv: Optional[List[str]] = None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        logging.basicConfig(level=logging.INFO if args.pop("verbose") else logging.WARNING)
        values = resolve(command, {k: v for k, v in args.items() if k != "config"}, args.get("config"))
        if command in TRAIN_COMMANDS:
            return cmd_train(values)
        return HANDLERS[command](values)
    except StyletuneError as e:
        print(f"error: {type(e).__name__}: {e}".replace("\n", " "), file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {type(e).__name__}: {e}".replace("\n", " "), file=sys.stderr)
        return 4
    except RuntimeError as e:
        print(f"error: TrainingError: {e}".replace("\n", " "), file=sys.stderr)
        return 4


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
