"""
    File for development testing
"""
import logging
from time import time

from vortexforge.api import check_configuration, desingularize

if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    print(check_configuration("rotating-pair"))

    start = time()
    point = desingularize("rotating-pair", 0.05, N=32)
    end = time()
    print(point.state)
    print(f"N_conf={point.diagnostics.n_conf:.6g}, N_vel={point.diagnostics.n_vel:.6g}")
    print(f"Time to desingularize: {end - start}")
