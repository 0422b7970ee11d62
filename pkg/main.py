import sys

from rankcal.controller import api

sys.exit(api.Start())
