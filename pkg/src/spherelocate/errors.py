"""Exception hierarchy.

Every pipeline failure derives from :class:`SphereLocateError` and carries a
stable ``code`` string plus the process exit status the CLI reports for it.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NO_DETECTION = 4
EXIT_ESTIMATION = 5


class SphereLocateError(Exception):
    code = "error"
    exit_status = EXIT_ESTIMATION


# geometry / threshold model
class DegenerateSphere(SphereLocateError, ValueError):
    code = "degenerate_sphere"


class NotAnEllipse(SphereLocateError, ValueError):
    code = "not_an_ellipse"


class PointNotOnConic(SphereLocateError, ValueError):
    code = "point_not_on_conic"


class SphereTooClose(SphereLocateError, ValueError):
    code = "sphere_too_close"


class ConeDegenerate(SphereLocateError, ValueError):
    code = "cone_degenerate"


class UndefinedAtPrincipalPoint(SphereLocateError, ValueError):
    code = "undefined_at_principal_point"


# image input
class ParseError(SphereLocateError, ValueError):
    code = "parse_error"
    exit_status = EXIT_PARSE


class ImageTooSmall(SphereLocateError, ValueError):
    code = "image_too_small"
    exit_status = EXIT_PARSE


# detection
class DetectionError(SphereLocateError):
    code = "detection_failed"
    exit_status = EXIT_NO_DETECTION


class NoEdges(DetectionError):
    code = "no_edges"


class Collinear(DetectionError, ValueError):
    code = "collinear"


class TooFewPoints(DetectionError):
    code = "too_few_points"


class NoCircleFound(DetectionError):
    code = "no_circle_found"


class TooFewProfilePoints(DetectionError):
    code = "too_few_profile_points"


class DegenerateInput(DetectionError, ValueError):
    code = "degenerate_input"


class NoEllipseSolution(DetectionError):
    code = "no_ellipse_solution"


class NoConsensus(DetectionError):
    code = "no_consensus"


# 3D estimation
class RankDeficient(SphereLocateError):
    code = "rank_deficient"


class DivergedBehindCamera(SphereLocateError):
    code = "diverged_behind_camera"


class SilhouetteOutsideImage(SphereLocateError, ValueError):
    code = "silhouette_outside_image"
    exit_status = EXIT_USAGE
