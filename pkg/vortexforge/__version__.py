"""
vortexforge Setup Configuration.
"""

#                 _                 __
#  __ __  ___   _| |_  ___  __ __  / _|  ___   _ _   __ _   ___
#  \ V / / _ \ |  _| / -_) \ \ / |  _| / _ \ | '_| / _` | / -_)
#   \_/  \___/  \__| \___| /_\_\ |_|   \___/ |_|   \__, | \___|
#                                                  |___/

project = "vortexforge"
description = "Point-vortex equilibria and their hollow-vortex desingularization by layer potentials"
url = ""
version = "0.1.0"
author = "vortexforge developers"
author_email = ""
copyright = "2026 vortexforge developers"
