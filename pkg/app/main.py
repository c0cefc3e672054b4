"""
Command-line entry point of the ISE benchmark with LangGraph orchestration.

    run        simulate, summarize and write every output file
    summarize  rebuild the tables from an existing records.csv
    verify     run the property suite and write verify.csv

Exit codes: 0 success, 1 configuration error, 2 flagged cells or failed checks.
"""
import argparse
import asyncio
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from app.agents.flow_logger import FlowLogger
from app.agents.master_agent import MasterAgent
from app.agents.summary_agent import SummaryAgent
from app.agents.report_agent import ReportAgent
from app.agents.verify_agent import VerifyAgent
from app.tools.errors import AcdfError, ConfigError
from app.tools.simulation import SimulationConfig, load_config
from app.tools.summary import read_records

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acdf", description="Asymmetric-kernel CDF estimator benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "simulate all cells and write records, tables and curves"),
        ("summarize", "rebuild tables from <out-dir>/records.csv"),
        ("verify", "run the property suite and write <out-dir>/verify.csv"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--sizes", help="comma separated sample sizes")
        p.add_argument("--distributions", help="comma separated indices 1..8, or 'all'")
        p.add_argument("--estimators", help="comma separated indices 1..10 or labels, or 'all'")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--format", dest="formats", action="append", choices=("csv", "markdown"),
                       help="output format; repeat for both")
        p.add_argument("--threads", type=int)
    return parser


def config_from_args(args: argparse.Namespace) -> SimulationConfig:
    return load_config(
        args.config,
        seed=args.seed,
        replicates=args.replicates,
        sizes=args.sizes,
        distributions=args.distributions,
        estimators=args.estimators,
        out_dir=args.out_dir,
        formats=tuple(args.formats) if args.formats else None,
        threads=args.threads,
    )


async def run_command(config: SimulationConfig, logger: FlowLogger) -> int:
    state = await MasterAgent(logger=logger).run({"config": config})
    for step in state["failed_steps"]:
        print(f"[{step['stage']}] failed: {step['error']}")
    print(f"[run] {len(state['records'])} records, {len(state['flagged'])} flagged cells")
    for path in state["written"]:
        print(f"[run] wrote {path}")
    soft = [c for c in state["checks"] if not c.passed]
    if soft:
        print(f"[run] {len(soft)} soft ordering check(s) did not hold; see the flow log")
    return EXIT_OK if state["status"] == "ok" else EXIT_PARTIAL


async def summarize_command(config: SimulationConfig, logger: FlowLogger) -> int:
    records = read_records(Path(config.out_dir) / "records.csv")
    state = await SummaryAgent().run({"records": records, "logger": logger})
    if not state.get("success"):
        print(f"[summarize] failed: {state['error']}")
        return EXIT_PARTIAL
    state = await ReportAgent().run({"config": config, "table": state["table"], "write_records": False})
    if not state.get("success"):
        print(f"[summarize] failed: {state['error']}")
        return EXIT_PARTIAL
    for path in state["written"]:
        print(f"[summarize] wrote {path}")
    return EXIT_PARTIAL if any(r.flagged for r in records) else EXIT_OK


async def verify_command(config: SimulationConfig, logger: FlowLogger) -> int:
    state = await VerifyAgent().run({"config": config, "logger": logger})
    failed = [c for c in state["checks"] if not c.passed]
    for check in failed:
        print(f"[verify] {check.check} failed: observed {check.observed:.6g}, expected {check.expected:.6g}")
    print(f"[verify] {len(state['checks']) - len(failed)}/{len(state['checks'])} checks passed")
    return EXIT_OK if state.get("success") else EXIT_PARTIAL


COMMANDS = {"run": run_command, "summarize": summarize_command, "verify": verify_command}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logger = FlowLogger()
    logger.log_event(f"Command '{args.command}' started")
    try:
        code = asyncio.run(COMMANDS[args.command](config, logger))
    except AcdfError as e:
        print(f"[{args.command}] failed: {e}", file=sys.stderr)
        code = EXIT_PARTIAL
    logger.log_final_response(f"command={args.command} exit={code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
