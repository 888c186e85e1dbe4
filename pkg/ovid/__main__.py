import sys

from ovid.main import main, setup_logging

setup_logging()
sys.exit(main())
