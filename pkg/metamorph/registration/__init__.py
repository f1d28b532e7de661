"""Single-pair registration.

Minimizes the pair energy over one deformation with both images fixed, using
Fletcher-Reeves descent in a regularized H¹ metric.
"""

from metamorph.registration.metric import h1_precondition, precondition_values
from metamorph.registration.ncg import RegistrationOptions, RegistrationResult, register
