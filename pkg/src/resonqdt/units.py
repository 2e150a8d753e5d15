"""Physical constants and unit conversions (atomic units throughout)."""

HARTREE_TO_CM = 219474.63137054
CM_TO_HARTREE = 1.0 / HARTREE_TO_CM
AMU_TO_ME = 1822.888486

RB85_MASS_AMU = 84.911789738
RB85_REDUCED_MASS = 0.5 * RB85_MASS_AMU * AMU_TO_ME

RB_FINE_STRUCTURE_CM = 237.6


def cm_to_hartree(x):
    return x * CM_TO_HARTREE


def hartree_to_cm(x):
    return x * HARTREE_TO_CM
