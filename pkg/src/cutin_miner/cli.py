"""Command-line surface: synth, detect, compare, replay.

Exit codes: 0 success, 2 input error, 3 empty-result warning, 1 unexpected
failure. Every output embeds its run manifest; fixed seeds make the whole
synth -> detect -> compare chain byte-reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .detector import DEFAULT_PARAMS, DetectorParams, detect_cutins
from .interchange import (
    InterchangeError,
    iter_corpus,
    parse_scenario_stream,
    write_scenario_stream,
)
from .metrics import (
    SEVERITY_BOUNDS,
    compute_all,
    event_row,
    read_event_table,
    write_event_table,
)
from .model import scenario_eligible
from .report import (
    RunManifest,
    format_comparison_text,
    format_instants_text,
    key_instants,
    manifest_params,
    replay_series,
    write_comparison_report,
    write_curves,
    write_replay,
    write_risk_space,
)
from .stats import (
    DEFAULT_FAMILY,
    DEFAULT_RESAMPLES,
    DEFAULT_SEED,
    GAP_THRESHOLDS,
    SPEED_MATCH_RANGE_KMH,
    compare_metrics,
)
from .synth import CorpusConfig, generate_corpus, replay_twin

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3


def _pair(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2 or parts[0] >= parts[1]:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' with lo < hi, got {text!r}")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutin-miner",
        description="Mine lane-change cut-in events from scenario corpora and "
                    "compare AV-targeted vs HDV-targeted populations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", default=".", help="Directory for outputs.")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p_synth = sub.add_parser("synth", help="Generate a synthetic corpus with labels.")
    common(p_synth)
    p_synth.add_argument("--preset",
                         choices=["demo", "detector-oracle", "paper-mimic", "replay-twin"],
                         default="demo")
    p_synth.add_argument("--n-scenarios", type=int, default=None)
    p_synth.add_argument("--negative-fraction", type=float, default=None)
    p_synth.add_argument("--config", help="JSON file overriding corpus settings.")

    p_detect = sub.add_parser("detect", help="Detect events and write the metrics table.")
    common(p_detect)
    p_detect.add_argument("--input", required=True, help="Interchange corpus path.")
    p_detect.add_argument("--strict", action="store_true",
                          help="Abort on the first malformed record.")
    p_detect.add_argument("--threads", type=int, default=1)
    p_detect.add_argument("--diagnostics", action="store_true",
                          help="Also dump per-candidate criterion verdicts.")
    p_detect.add_argument("--thresholds-file",
                          help="JSON file overriding detector thresholds.")
    p_detect.add_argument("--severity-bounds", type=_pair, default=SEVERITY_BOUNDS)

    p_cmp = sub.add_parser("compare", help="Two-population statistics from an event table.")
    common(p_cmp)
    p_cmp.add_argument("--input", required=True, help="Event table from 'detect'.")
    p_cmp.add_argument("--family-size", type=int, default=DEFAULT_FAMILY)
    p_cmp.add_argument("--speed-match-range", type=_pair, default=SPEED_MATCH_RANGE_KMH)
    p_cmp.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    p_cmp.add_argument("--no-curves", action="store_true")

    p_rep = sub.add_parser("replay", help="Per-frame time series for one event.")
    common(p_rep)
    p_rep.add_argument("--input", required=True, help="Interchange corpus path.")
    p_rep.add_argument("--scenario-id", required=True)
    p_rep.add_argument("--cutter-id", required=True)
    p_rep.add_argument("--target-id", required=True)
    p_rep.add_argument("--thresholds-file")
    return parser


def _load_params(path: str | None) -> DetectorParams:
    if not path:
        return DEFAULT_PARAMS
    with open(path, "r", encoding="utf-8") as fp:
        return DetectorParams.from_dict(json.load(fp))


# -- synth --------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.jsonl"
    labels_path = out / "labels.jsonl"

    if args.preset == "replay-twin":
        scenario, label = replay_twin()
        with open(corpus_path, "w", encoding="utf-8") as fp:
            write_scenario_stream([scenario], fp)
        with open(labels_path, "w", encoding="utf-8") as fp:
            fp.write(json.dumps(label, separators=(",", ":")) + "\n")
        counts = {"scenarios": 1, "positives": 1, "negatives": 0,
                  "events": {"AV": 1, "HDV": 0}}
    else:
        if args.preset == "paper-mimic":
            config = CorpusConfig.paper_mimic(seed=args.seed)
        elif args.preset == "detector-oracle":
            config = CorpusConfig.detector_oracle(seed=args.seed)
        else:
            config = CorpusConfig.demo(seed=args.seed)
        overrides = {}
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fp:
                overrides.update(json.load(fp))
        if args.n_scenarios is not None and args.preset != "paper-mimic":
            overrides["n_scenarios"] = args.n_scenarios
        if args.negative_fraction is not None:
            overrides["negative_fraction"] = args.negative_fraction
        if overrides:
            config = dataclasses.replace(config, **overrides)
        with open(corpus_path, "w", encoding="utf-8") as cfp, \
                open(labels_path, "w", encoding="utf-8") as lfp:
            counts = generate_corpus(config, cfp, lfp)

    manifest = RunManifest(command="synth", inputs=[],
                           seed=args.seed,
                           params={"preset": args.preset}, counts=counts)
    manifest.write(out / "synth_manifest.json")
    print(f"wrote {counts['scenarios']} scenarios to {corpus_path}")
    print(f"labels: {labels_path} ({counts['positives']} positives, "
          f"{counts['negatives']} negatives)")
    return EXIT_OK


# -- detect -------------------------------------------------------------------


def _detect_one(line: str, params: DetectorParams, severity_bounds, diagnostics: bool):
    """Worker: one corpus line -> (rows, diag rows, eligible flag, error)."""
    rows, diags = [], []
    err = None
    eligible = False

    def on_error(exc):
        nonlocal err
        err = str(exc)

    for scenario in parse_scenario_stream([line], on_error=on_error):
        if not scenario_eligible(scenario, params.eligibility_min_speed,
                                 params.eligibility_min_frames):
            continue
        eligible = True
        if diagnostics:
            detections, rejects = detect_cutins(scenario, params, diagnostics=True)
            for r in rejects:
                diags.append((scenario.scenario_id, r.cutter_id, r.target_id,
                              r.window[0], r.window[1], r.entry_frame,
                              r.verdict.as_dict()))
        else:
            detections = detect_cutins(scenario, params)
        for det in detections:
            metrics = compute_all(det.event, scenario, severity_bounds)
            rows.append(event_row(det.event, metrics))
    return rows, diags, eligible, err


def cmd_detect(args) -> int:
    try:
        params = _load_params(args.thresholds_file)
    except (OSError, ValueError) as exc:
        print(f"error: bad thresholds file: {exc}", file=sys.stderr)
        return EXIT_INPUT
    in_path = Path(args.input)
    if not in_path.exists():
        print(f"error: no such input {in_path}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows, diags = [], []
    n_scenarios = n_eligible = 0
    parse_errors: list[str] = []

    def on_error(exc: InterchangeError):
        parse_errors.append(str(exc))
        if args.strict:
            raise exc

    if args.threads > 1:
        with open(in_path, "r", encoding="utf-8") as fp:
            lines = [l for l in fp if l.strip()]
        n_scenarios = len(lines)
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            work = pool.map(_detect_one, lines,
                            [params] * len(lines),
                            [args.severity_bounds] * len(lines),
                            [args.diagnostics] * len(lines),
                            chunksize=32)
            for wrows, wdiags, weligible, werr in work:
                if werr:
                    parse_errors.append(werr)
                    if args.strict:
                        print(f"error: {werr}", file=sys.stderr)
                        return EXIT_INPUT
                n_eligible += int(weligible)
                rows.extend(wrows)
                diags.extend(wdiags)
    else:
        try:
            with open(in_path, "r", encoding="utf-8") as fp:
                for scenario in parse_scenario_stream(fp, strict=args.strict,
                                                      on_error=on_error):
                    n_scenarios += 1
                    if not scenario_eligible(scenario):
                        continue
                    n_eligible += 1
                    if args.diagnostics:
                        detections, rejects = detect_cutins(scenario, params,
                                                            diagnostics=True)
                        for r in rejects:
                            diags.append((scenario.scenario_id, r.cutter_id,
                                          r.target_id, r.window[0], r.window[1],
                                          r.entry_frame, r.verdict.as_dict()))
                    else:
                        detections = detect_cutins(scenario, params)
                    for det in detections:
                        metrics = compute_all(det.event, scenario, args.severity_bounds)
                        rows.append(event_row(det.event, metrics))
        except InterchangeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT

    rows.sort(key=lambda r: (r.scenario_id, r.entry_frame, r.cutter_id, r.target_id))

    manifest = RunManifest(
        command="detect", inputs=[str(in_path)], seed=args.seed,
        params=manifest_params(params, args.severity_bounds, DEFAULT_FAMILY,
                               SPEED_MATCH_RANGE_KMH, DEFAULT_RESAMPLES),
        counts={"scenarios": n_scenarios, "eligible": n_eligible,
                "events": len(rows), "parse_errors": len(parse_errors)},
    )
    events_path = out / "events.csv"
    with open(events_path, "w", encoding="utf-8", newline="") as fp:
        write_event_table(rows, fp, manifest.header_lines())
    manifest.write(out / "detect_manifest.json")

    if args.diagnostics:
        diag_path = out / "diagnostics.csv"
        with open(diag_path, "w", encoding="utf-8", newline="") as fp:
            for line in manifest.header_lines():
                fp.write(f"# {line}\n")
            fp.write("scenario_id,cutter_id,target_id,window_start,window_end,"
                     "entry_frame,c1,c2,c3,c4,c5,c6,c7,c8,all_pass\n")
            for sid, cid, tid, w0, w1, entry, verdict in diags:
                flags = ",".join(str(int(verdict[c])) for c in
                                 ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"))
                fp.write(f"{sid},{cid},{tid},{w0},{w1},"
                         f"{entry if entry is not None else ''},{flags},"
                         f"{int(verdict['all_pass'])}\n")

    by_kind = {"AV": 0, "HDV": 0}
    by_side = {"left": 0, "right": 0}
    for r in rows:
        by_kind[r.target_kind] += 1
        by_side[r.side] += 1
    maneuvers = Counter((r.scenario_id, r.cutter_id, r.entry_frame) for r in rows)
    shared = sum(v - 1 for v in maneuvers.values() if v > 1)

    print(f"scenarios: {n_scenarios} read, {n_eligible} eligible, "
          f"{len(parse_errors)} malformed")
    print(f"events: {len(rows)} "
          f"(HDV->AV {by_kind['AV']}, HDV->HDV {by_kind['HDV']}; "
          f"left {by_side['left']}, right {by_side['right']})")
    if shared:
        print(f"note: {shared} event(s) share a (scenario, cutter, entry frame) "
              "maneuver with another target")
    print(f"wrote {events_path}")
    if n_scenarios == 0 or not rows:
        print("warning: empty result", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


# -- compare ------------------------------------------------------------------


def cmd_compare(args) -> int:
    in_path = Path(args.input)
    if not in_path.exists():
        print(f"error: no such input {in_path}", file=sys.stderr)
        return EXIT_INPUT
    try:
        with open(in_path, "r", encoding="utf-8") as fp:
            rows = read_event_table(fp)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rows_a = [r for r in rows if r.target_kind == "AV"]
    rows_b = [r for r in rows if r.target_kind == "HDV"]
    if not rows_a or not rows_b:
        print("comparison skipped: table contains a single population "
              f"(AV {len(rows_a)}, HDV {len(rows_b)})", file=sys.stderr)
        return EXIT_EMPTY

    report = compare_metrics(
        rows_a, rows_b, family=args.family_size, seed=args.seed,
        resamples=args.resamples, speed_range_kmh=args.speed_match_range)

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command="compare", inputs=[str(in_path)], seed=args.seed,
        params=manifest_params(DEFAULT_PARAMS, SEVERITY_BOUNDS, args.family_size,
                               args.speed_match_range, args.resamples,
                               GAP_THRESHOLDS),
        counts={"events_av": len(rows_a), "events_hdv": len(rows_b)},
    )
    write_comparison_report(report, manifest, out / "comparison.json")
    manifest.write(out / "compare_manifest.json")
    if not args.no_curves:
        curves = write_curves(rows_a, rows_b, out / "curves", manifest)
        risk_a = write_risk_space(rows_a, "av", out, manifest)
        risk_b = write_risk_space(rows_b, "hdv", out, manifest)
        emitted = curves + [p for p in (risk_a, risk_b) if p]
        print(f"curves: {', '.join(emitted) if emitted else 'none'}")
    print(format_comparison_text(report))
    print(f"wrote {out / 'comparison.json'}")
    return EXIT_OK


# -- replay -------------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        params = _load_params(args.thresholds_file)
    except (OSError, ValueError) as exc:
        print(f"error: bad thresholds file: {exc}", file=sys.stderr)
        return EXIT_INPUT
    in_path = Path(args.input)
    if not in_path.exists():
        print(f"error: no such input {in_path}", file=sys.stderr)
        return EXIT_INPUT

    scenario = None
    for s in iter_corpus(str(in_path)):
        if s.scenario_id == args.scenario_id:
            scenario = s
            break
    if scenario is None:
        print(f"error: scenario {args.scenario_id!r} not found", file=sys.stderr)
        return EXIT_INPUT

    detections = detect_cutins(scenario, params)
    match = [d for d in detections
             if d.event.cutter_id == args.cutter_id
             and d.event.target_id == args.target_id]
    if not match:
        print(f"error: no detectable event for cutter {args.cutter_id!r} vs "
              f"target {args.target_id!r} in {args.scenario_id!r}", file=sys.stderr)
        return EXIT_INPUT
    event = match[0].event

    from .model import nearest_lane_ids
    assoc = nearest_lane_ids(scenario.track(event.cutter_id), scenario.lanes)
    lane_id = assoc[event.completion_frame] or assoc[event.entry_frame]
    rows = replay_series(scenario, event, lane_id)
    instants = key_instants(rows, event)

    out = Path(args.output_dir)
    manifest = RunManifest(
        command="replay",
        inputs=[str(in_path)], seed=args.seed,
        params=manifest_params(params, SEVERITY_BOUNDS, DEFAULT_FAMILY,
                               SPEED_MATCH_RANGE_KMH, DEFAULT_RESAMPLES),
        counts={"frames": len(rows)},
    )
    series_path, instants_path = write_replay(rows, instants, manifest, out)
    print(format_instants_text(instants))
    print(f"wrote {series_path} and {instants_path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"synth": cmd_synth, "detect": cmd_detect,
                "compare": cmd_compare, "replay": cmd_replay}
    try:
        return handlers[args.command](args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
