from mginf.cli import main
import sys

sys.exit(main())
