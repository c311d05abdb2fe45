"""
Walsh Hardness package.

Walsh-coefficient difficulty metrics for estimation of distribution
algorithms, with the ECGA/BOA runs and statistics used to validate them.
"""
