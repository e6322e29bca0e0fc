import sys

from scripts.qkd_cli.cli import main

sys.exit(main())
