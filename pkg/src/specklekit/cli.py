"""Command-line pipeline: phantom -> corrupt -> filter -> assess, plus mc and report.

Every command writes a provenance sidecar ``<output>.prov`` (key=value) with
the fully resolved configuration and the SHA-256 of each input, enough to
re-run the artifact byte-identically. Exit codes: 0 success, 1 runtime error,
2 validation error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import logging
import shlex
import sys
from pathlib import Path

from . import __version__
from .distributions import make_rng
from .filters import Fallback, FilterSpec, Method, apply_filter
from .io import FormatError, read_fimg, read_keyvalue, write_fimg, write_keyvalue, write_pgm
from .metrics import METRICS, assess
from .montecarlo import (DEFAULT_MASTER_SEED, ExperimentSpec, conflict_report, run_experiment,
                         summarize)
from .phantom import (LayoutError, PhantomLayout, Situation, build_phantom, corrupt, layout_to_dict,
                      load_layout, situation_truth)
from .report import (RESULTS_HEADER, boxplot_svg, conflict_csv, parse_result_row, record_csv, result_row,
                     results_csv, summary_csv, write_text)

log = logging.getLogger("specklekit")

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2


class ValidationError(Exception):
    pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# option keys whose flag spelling differs from the key
_FLAG_NAMES = {"input": "--in"}


def _write_provenance(out, command: str, options: dict, inputs=(), layout=None, extra=None):
    prov = {"command": command, "version": __version__}
    prov.update(options)
    prov.update(extra or {})
    for name, path in inputs:
        prov[f"input.{name}"] = str(path)
        prov[f"input.{name}.sha256"] = _sha256(path)
    if layout is not None:
        prov.update({f"layout.{k}": v for k, v in layout_to_dict(layout).items()})
    argv = ["specklekit", command]
    for k, v in options.items():
        flag = _FLAG_NAMES.get(k, "--" + k.replace("_", "-"))
        if isinstance(v, bool):
            if v:
                argv.append(flag)
        elif v is not None:
            argv += [flag, str(v)]
    prov["rerun"] = shlex.join(argv)
    write_keyvalue(f"{out}.prov", prov)


def _layout(path):
    return load_layout(path) if path else PhantomLayout().validate()


def _maybe_pgm(args, image):
    if getattr(args, "pgm", None):
        lo, hi = write_pgm(args.pgm, image)
        write_keyvalue(f"{args.pgm}.prov", {"format": "P5 16-bit big-endian", "source": str(args.out),
                                            "lo": repr(lo), "hi": repr(hi),
                                            "mapping": "q = round((v - lo) * 65535 / (hi - lo))"})


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_phantom(args):
    layout = _layout(args.layout)
    if args.background_mean is not None or args.contrast_ratio is not None:
        layout = dataclasses.replace(
            layout,
            background_mean=layout.background_mean if args.background_mean is None else args.background_mean,
            contrast_ratio=layout.contrast_ratio if args.contrast_ratio is None else args.contrast_ratio,
        ).validate()
    image = build_phantom(layout)
    write_fimg(args.out, image)
    _maybe_pgm(args, image)
    _write_provenance(args.out, "phantom", {"layout": args.layout, "out": args.out,
                                            "background_mean": layout.background_mean,
                                            "contrast_ratio": layout.contrast_ratio},
                      [("layout", args.layout)] if args.layout else (), layout)


def cmd_corrupt(args):
    layout = dataclasses.replace(_layout(args.layout), contrast_ratio=args.contrast_ratio).validate()
    situation = Situation.from_table(args.situation, layout, args.looks)
    image = corrupt(layout, situation, make_rng(args.seed))
    write_fimg(args.out, image)
    _maybe_pgm(args, image)
    if args.truth_out:
        write_fimg(args.truth_out, situation_truth(layout, situation))
    _write_provenance(args.out, "corrupt", {"layout": args.layout, "situation": args.situation,
                                            "looks": args.looks, "seed": args.seed,
                                            "contrast_ratio": args.contrast_ratio, "out": args.out,
                                            "truth_out": args.truth_out},
                      [("layout", args.layout)] if args.layout else (), layout)


def cmd_filter(args):
    image = read_fimg(args.input)
    spec = FilterSpec(args.method, args.window, args.looks, args.fallback)
    out = apply_filter(image, spec)
    write_fimg(args.out, out)
    _maybe_pgm(args, out)
    _write_provenance(args.out, "filter", {"input": args.input, "method": spec.method.value,
                                           "window": spec.window, "looks": spec.looks,
                                           "fallback": spec.fallback.value, "out": args.out},
                      [("input", args.input)])


def cmd_assess(args):
    layout = _layout(args.layout)
    record = assess(read_fimg(args.input), layout, read_fimg(args.truth), args.all_edges)
    text = record_csv(record)
    if args.out:
        write_text(args.out, text)
        inputs = [("input", args.input), ("truth", args.truth)] + ([("layout", args.layout)] if args.layout else [])
        _write_provenance(args.out, "assess", {"input": args.input, "truth": args.truth, "layout": args.layout,
                                               "all_edges": args.all_edges, "out": args.out}, inputs, layout)
    sys.stdout.write(text)


_SPEC_KEYS = ("situations", "filters", "replications", "master_seed", "looks", "window", "contrast_ratio",
              "estimate_looks", "fallback", "all_edges", "layout")


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes"):
        return True
    if s.lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def load_experiment_spec(path) -> ExperimentSpec:
    """Parse an experiment file in key=value format; layout paths are relative to the file."""
    d = read_keyvalue(path) if path else {}
    unknown = sorted(set(d) - set(_SPEC_KEYS))
    if unknown:
        raise ValidationError(f"unknown experiment keys: {', '.join(unknown)}")
    kw = {}
    try:
        if "situations" in d:
            kw["situations"] = tuple(int(s) for s in d["situations"].split(","))
        if "filters" in d:
            kw["filters"] = tuple(Method(f.strip()) for f in d["filters"].split(","))
        for k in ("replications", "master_seed", "window"):
            if k in d:
                kw[k] = int(d[k])
        for k in ("looks", "contrast_ratio"):
            if k in d:
                kw[k] = float(d[k])
        for k in ("estimate_looks", "all_edges"):
            if k in d:
                kw[k] = _bool(d[k])
        if "fallback" in d:
            kw["fallback"] = Fallback(d["fallback"])
        if "layout" in d:
            kw["layout"] = load_layout(Path(path).parent / d["layout"])
        return ExperimentSpec(**kw)
    except LayoutError:
        raise
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from e


def spec_to_dict(spec: ExperimentSpec) -> dict:
    d = {
        "situations": ",".join(map(str, spec.situations)),
        "filters": ",".join(m.value for m in spec.filters),
        "replications": spec.replications,
        "master_seed": spec.master_seed,
        "looks": repr(float(spec.looks)),
        "window": spec.window,
        "contrast_ratio": repr(float(spec.contrast_ratio)),
        "estimate_looks": str(spec.estimate_looks).lower(),
        "fallback": spec.fallback.value,
        "all_edges": str(spec.all_edges).lower(),
    }
    d.update({f"layout.{k}": v for k, v in layout_to_dict(spec.layout).items()})
    return d


def _fingerprint(spec: ExperimentSpec) -> str:
    text = "".join(f"{k}={v}\n" for k, v in spec_to_dict(spec).items())
    return hashlib.sha256(text.encode()).hexdigest()


def _read_partial(path: Path, spec: ExperimentSpec):
    lines = path.read_text().splitlines(keepends=True)
    if not lines or lines[0].strip() != f"# spec {_fingerprint(spec)}":
        raise ValidationError(f"{path} was written for a different experiment")
    found = {}
    for row in csv.reader(l for l in lines[1:] if l.endswith("\n")):
        if tuple(row) == RESULTS_HEADER:
            continue
        try:
            r = parse_result_row(row)
        except (ValueError, FormatError):
            continue
        found.setdefault((r.situation, r.replication), {})[r.filter] = r
    complete = []
    for coord, recs in found.items():
        if set(recs) == set(spec.filters):
            complete.extend(recs.values())
    return complete


def run_mc(spec: ExperimentSpec, out, workers: int = 1, resume: bool = False) -> list:
    """Run an experiment streaming rows to ``<out>.partial``; write the canonical CSV at the end."""
    out = Path(out)
    partial = out.with_name(out.name + ".partial")
    previous = []
    if partial.exists():
        if not resume:
            raise ValidationError(f"{partial} exists; pass --resume to continue it or delete it")
        previous = _read_partial(partial, spec)
        log.info("resuming with %d completed replications", len(previous) // len(spec.filters))
    # rewrite the partial file with only complete replications, then append
    with open(partial, "w", newline="") as f:
        f.write(f"# spec {_fingerprint(spec)}\n")
        w = csv.writer(f, lineterminator="\r\n")
        w.writerow(RESULTS_HEADER)
        w.writerows(result_row(r) for r in sorted(previous, key=lambda r: r.key))
        f.flush()

        def sink(batch):
            w.writerows(result_row(r) for r in batch)
            f.flush()

        done = {(r.situation, r.replication) for r in previous}
        new = run_experiment(spec, workers=workers, skip=done, on_result=sink)
    results = sorted(previous + new, key=lambda r: r.key)
    write_text(out, results_csv(results))
    partial.unlink()
    return results


def _outputs(out: Path, stem: str | None = None):
    stem = stem or out.stem
    d = out.parent
    return d / f"{stem}_summary.csv", d / f"{stem}_conflicts.csv", {m: d / f"{stem}_{m}.svg" for m in METRICS}


def write_reports(results, summary_path, conflict_path, svg_paths):
    summaries = summarize(results)
    write_text(summary_path, summary_csv(summaries))
    write_text(conflict_path, conflict_csv(conflict_report(results)))
    for metric, path in svg_paths.items():
        write_text(path, boxplot_svg(summaries, metric))


def cmd_mc(args):
    spec = load_experiment_spec(args.spec)
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    out = Path(args.out)
    results = run_mc(spec, out, args.threads, args.resume)
    write_reports(results, *_outputs(out))
    options = {"spec": args.spec, "out": args.out, "threads": args.threads,
               "replications": spec.replications, "seed": spec.master_seed}
    resolved = {f"resolved.{k}": v for k, v in spec_to_dict(spec).items()}
    _write_provenance(out, "mc", options, [("spec", args.spec)] if args.spec else (), extra=resolved)


def cmd_report(args):
    from .report import read_results_csv
    results = read_results_csv(args.results)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.results).stem
    summary_path, conflict_path, svgs = _outputs(out_dir / f"{stem}.csv", stem)
    write_reports(results, summary_path, conflict_path, svgs)
    _write_provenance(summary_path, "report", {"results": args.results, "out_dir": args.out_dir},
                      [("results", args.results)])


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specklekit", description="Speckle filter assessment workbench")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="write the truth phantom")
    s.add_argument("--layout", help="layout file (key=value); canonical layout if omitted")
    s.add_argument("--background-mean", type=float)
    s.add_argument("--contrast-ratio", type=float)
    s.add_argument("--out", required=True, help="FIMG output path")
    s.add_argument("--pgm", help="also write a 16-bit PGM for viewing")
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("corrupt", help="simulate a speckled phantom for one situation")
    s.add_argument("--layout")
    s.add_argument("--situation", type=int, required=True, choices=range(7))
    s.add_argument("--looks", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    s.add_argument("--contrast-ratio", type=float, default=4.0)
    s.add_argument("--out", required=True)
    s.add_argument("--truth-out", help="also write the situation's truth phantom (FIMG)")
    s.add_argument("--pgm")
    s.set_defaults(func=cmd_corrupt)

    s = sub.add_parser("filter", help="despeckle an image")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--method", required=True, choices=[m.value for m in Method])
    s.add_argument("--window", type=int, default=7)
    s.add_argument("--looks", type=float, default=1.0)
    s.add_argument("--fallback", default="mean", choices=[f.value for f in Fallback])
    s.add_argument("--out", required=True)
    s.add_argument("--pgm")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("assess", help="compute the protocol measures of a filtered image")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--layout")
    s.add_argument("--all-edges", action="store_true")
    s.add_argument("--out", help="CSV output path (stdout always receives the row)")
    s.set_defaults(func=cmd_assess)

    s = sub.add_parser("mc", help="run the Monte Carlo experiment")
    s.add_argument("--spec", help="experiment file (key=value); defaults if omitted")
    s.add_argument("--out", required=True, help="results CSV path")
    s.add_argument("--threads", "--workers", dest="threads", type=int, default=1,
                   help="worker processes (results do not depend on this)")
    s.add_argument("--replications", type=int)
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--resume", action="store_true", help="continue from <out>.partial")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("report", help="summaries and boxplots from a results CSV")
    s.add_argument("--results", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except LayoutError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, FormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
