"""Compare the Cython kernels with the numpy fallback.

    OPENBLAS_NUM_THREADS=1 python benchmarks/bench_backends.py --rows 2816
"""

import os
import sys

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

from s4rl.bench import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
