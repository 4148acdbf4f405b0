"""Exception hierarchy

Every error carries a stable, machine-readable `reason` and the exit code
the command line maps it to.
"""


__all__ = ['KurasyncError',
           'ValidationError',
           'DisconnectedGraph',
           'DuplicateEdge',
           'NonpositiveWeight',
           'SelfLoop',
           'NodeIndexError',
           'UncenteredFrequencies',
           'DomainError',
           'OrderNotComputed',
           'ParseError',
           'NumericalError',
           'SingularBeyondKernel',
           'Overflow',
           'NotAFlowSine',
           'SolverError',
           'MaxIterationsExceeded',
           'IterateLeftDomain',
           'SingularJacobian',
           'ReferenceSolveFailed',
           'ScanError',
           'NoSolutionAtK0',
           'TestNeverFails',
           'NonMonotoneDetected',
           'RetriesExhausted',
           'MethodFailed']


class KurasyncError(Exception):
    """Base class for all package errors"""
    reason = 'error'
    exit_code = 3


# Input validation
# ----------------
class ValidationError(KurasyncError, ValueError):
    reason = 'validation_error'
    exit_code = 4


class DisconnectedGraph(ValidationError):
    reason = 'disconnected_graph'


class DuplicateEdge(ValidationError):
    reason = 'duplicate_edge'


class NonpositiveWeight(ValidationError):
    reason = 'nonpositive_weight'


class SelfLoop(ValidationError):
    reason = 'self_loop'


class NodeIndexError(ValidationError):
    reason = 'node_index_out_of_range'


class UncenteredFrequencies(ValidationError):
    reason = 'uncentered_frequencies'


class DomainError(ValidationError):
    reason = 'domain_error'


class OrderNotComputed(ValidationError):
    reason = 'order_not_computed'


class ParseError(ValidationError):
    """Malformed case file

    Parameters
    ----------
    message : str
        What went wrong
    line : int (optional)
        1-based line number in the offending file
    field : str (optional)
        Name of the offending field
    """
    reason = 'parse_error'

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


# Numerics
# --------
class NumericalError(KurasyncError, ArithmeticError):
    reason = 'numerical_error'
    exit_code = 5


class SingularBeyondKernel(NumericalError):
    reason = 'singular_beyond_kernel'


class Overflow(NumericalError):
    reason = 'overflow'


class NotAFlowSine(NumericalError):
    reason = 'not_a_flow_sine'


# Solvers
# -------
class SolverError(KurasyncError, RuntimeError):
    """Solver failure, optionally carrying the last `SolveOutcome`"""
    reason = 'solver_error'
    exit_code = 3

    def __init__(self, message, outcome=None):
        self.outcome = outcome
        super().__init__(message)


class MaxIterationsExceeded(SolverError):
    reason = 'max_iterations_exceeded'


class IterateLeftDomain(SolverError):
    reason = 'iterate_left_domain'


class SingularJacobian(SolverError):
    reason = 'singular_jacobian'


class ReferenceSolveFailed(SolverError):
    reason = 'reference_solve_failed'


# Scans
# -----
class ScanError(KurasyncError, RuntimeError):
    reason = 'scan_error'
    exit_code = 3


class NoSolutionAtK0(ScanError):
    reason = 'no_solution_at_first_step'


class TestNeverFails(ScanError):
    reason = 'test_never_fails'
    __test__ = False


class NonMonotoneDetected(ScanError):
    reason = 'non_monotone_detected'


# Generators and experiments
# --------------------------
class RetriesExhausted(KurasyncError, RuntimeError):
    """Random model kept producing disconnected graphs"""
    reason = 'retries_exhausted'
    exit_code = 3

    def __init__(self, message, draws=None):
        self.draws = draws
        super().__init__(message)


class MethodFailed(KurasyncError, RuntimeError):
    reason = 'method_failed'
    exit_code = 3
