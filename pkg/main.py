import logging
import sys

from dotenv import load_dotenv  # type: ignore

from command_handlers import build_parser, dispatch
from settings import get_settings

load_dotenv()
logging.basicConfig(
    level=get_settings().log_level.upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


def main(argv=None) -> int:
    """Parses the command line and runs one subcommand."""
    args = build_parser().parse_args(argv)
    logger.info(f"Running '{args.command}'")
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
