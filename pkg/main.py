import argparse
import logging
import sys
from typing import List, Optional

from app.config import get_settings
from app.core.logging import setup_logging
from app.core.models.scenario import Command
from app.core.utils.exceptions import ScenarioError, ServiceException, convert_exception_to_exit_code
from app.dependencies import get_scenario_service


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="darboux-mech",
        description="Symplectic and contact Hamiltonian mechanics: simulate, check, reduce, symplectify.",
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Subcommand to run")
    parser.add_argument("--scenario", required=True, help="Path to the JSON scenario file")
    parser.add_argument("--seed", type=int, default=None, help="Seed for randomized checks (overrides the scenario)")
    parser.add_argument("--samples", type=int, default=None, help="Sample count for randomized checks")
    parser.add_argument("--out", default=None, help="Output directory for the CSV and report")
    parser.add_argument("--log-level", default=None, help="Override the configured log level")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging(settings, args.log_level)
    logger = logging.getLogger("app.cli")

    logger.info(f"🚀 {args.command} {args.scenario}")
    try:
        service = get_scenario_service()
        scenario = service.load_scenario(args.scenario)
        report = service.run(args.command, scenario, out_dir=args.out, seed=args.seed, samples=args.samples)
    except ScenarioError as e:
        logger.error(f"❌ {e.message}")
        for err in e.errors:
            print(f"  {err['path'] or '<root>'}: {err['message']}", file=sys.stderr)
        return e.exit_code
    except ServiceException as e:
        logger.error(f"❌ {type(e).__name__}: {e.message}")
        print(f"❌ {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"❌ Unhandled error: {e}", exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return convert_exception_to_exit_code(e)

    for check in report.checks:
        mark = "✅" if check.passed else "❌"
        print(f"{mark} {check.id}: {check.residual:.3e} (tol {check.tolerance:.1e})")
    logger.info(f"✅ {args.command} finished: {report.status}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n🛑 Interrupted by user")
        sys.exit(130)
