class FogSimError(Exception):
    """Base class for package errors."""


class ConfigError(FogSimError):
    """Scenario is inconsistent; raised before any event executes."""


class Uncovered(FogSimError):
    def __init__(self, robot):
        super().__init__(f"no fog server covers robot {robot!r}")
        self.robot = robot


class AlreadySpawned(FogSimError):
    def __init__(self, frs):
        super().__init__(f"sub-server already spawned for {frs!r}")
        self.frs = frs


class CalibrationError(FogSimError):
    pass


class Unbracketable(CalibrationError):
    def __init__(self, knob, lo_metric, hi_metric, target):
        super().__init__(
            f"knob {knob!r}: range endpoints give {lo_metric:.6g} and {hi_metric:.6g} ms, "
            f"which do not bracket target {target:.6g} ms"
        )
        self.knob = knob


class NonMonotone(CalibrationError):
    def __init__(self, knob, detail=""):
        super().__init__(f"knob {knob!r} does not move its metric monotonically{': ' + detail if detail else ''}")
        self.knob = knob


class FormatError(FogSimError):
    pass


class ProbeError(FogSimError):
    pass


class ResolveError(ProbeError):
    pass


class BindError(ProbeError):
    pass
