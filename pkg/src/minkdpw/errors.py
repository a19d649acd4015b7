"""Exception types raised by the loop-group and surface pipeline."""


class MinkDPWError(Exception):
    """Base class for all package errors."""


class NotInvertible(MinkDPWError):
    """A loop has a non-constant or vanishing determinant."""


class BandOverflow(MinkDPWError):
    """Truncation to the working band dropped more than the tail tolerance."""


class DetDrift(MinkDPWError):
    """Determinant of an integrated frame drifted away from 1."""


class NotInSL2C(MinkDPWError):
    """A constant matrix does not have unit determinant."""


class SmallCellSuspected(MinkDPWError):
    """The kernel system indicates the loop is not in the big cell."""


class ResidualTooLarge(MinkDPWError):
    """A factorization was found but does not reproduce its input."""


class NotInSmallCell(MinkDPWError):
    """A loop passed as a small-cell point is not of the expected form."""


class NoStableRatio(MinkDPWError):
    """The switch-factorization ratio is too close to one to pick a sign."""


class InvalidPotential(MinkDPWError):
    """A holomorphic potential violates the parity or band rules."""


class BadGrid(MinkDPWError):
    """Grid description is inconsistent with the integration start point."""


class LeftMaximalInterval(MinkDPWError):
    """The profile solution left its maximal interval of existence."""


class InvalidParameters(MinkDPWError):
    """Family parameters are outside the admissible range."""


class InfeasibleP(MinkDPWError):
    """No real parameter realizes the requested modulus."""


class DomainNotSymmetric(MinkDPWError):
    """The sampling grid is not closed under the requested symmetry."""


class IllConditioned(SmallCellSuspected):
    """The kernel system is too ill conditioned to trust its kernel."""


class NotPlusLoop(MinkDPWError, ValueError):
    """A loop expected to have no negative powers has some."""


class NotTwisted(MinkDPWError, ValueError):
    """A loop expected to be twisted is not."""


class NotRealForm(MinkDPWError):
    """A frame does not satisfy tau(F) = +-F."""


class NotNormalized(MinkDPWError):
    """A plus factor does not have a positive diagonal constant term."""


class SecondSmallCell(MinkDPWError):
    """The extended Sym formula has no finite value on the second small cell."""


class MissingAux(MinkDPWError):
    """A first-small-cell input needs its canonical decomposition."""


class InsufficientNeighborhood(MinkDPWError):
    """Too few valid vertices for a finite-difference estimate."""


class DegenerateMetric(MinkDPWError):
    """The first fundamental form is (nearly) singular."""


class ModulusRange(MinkDPWError, ValueError):
    """Elliptic parameter outside [0, 1]."""


class NotInR(MinkDPWError):
    """Moduli triple violates the membership inequality."""


class TotallyUmbilic(MinkDPWError):
    """The Hopf datum vanishes; the surface is totally umbilic."""


class NotSmyth(MinkDPWError):
    """The mesh does not carry Smyth potential metadata."""



class StabilizerViolation(MinkDPWError):
    """A switch matrix that should fix the Sym value does not."""


NonUnimodular = NotInSL2C
