import sys

from dbsim.cli import main

sys.exit(main())
