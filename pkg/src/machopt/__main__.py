from machopt.cli import main
import sys

sys.exit(main())
