import sys

from dotenv import load_dotenv

from metamorph.io_cli.cli import cli_main

# Load environment variables (METAMORPH_LOG_LEVEL, METAMORPH_WORKERS)
load_dotenv()

if __name__ == "__main__":
    sys.exit(cli_main(sys.argv[1:]))
