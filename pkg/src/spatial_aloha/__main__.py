import sys

from spatial_aloha.cli import main

sys.exit(main())
