import sys

from . import write_fixture_tree

dest = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
for name, p in write_fixture_tree(dest).items():
    print(f"{name}: {p}")
