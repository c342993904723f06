"""Exception hierarchy shared across the engine.

Three families matter to callers: evaluation errors (bad concrete states),
input errors (unparseable or ill-formed spec/worksheet files), and derivation
failures (a worksheet step could not be completed).  The CLI maps these to
exit codes 2 and 3; evaluation errors surface inside verdicts.
"""


class FlamesmithError(Exception):
    """Base class for every error raised by this package."""


class EvalError(FlamesmithError):
    """Evaluating an expression against a concrete state failed."""


class UnboundVariable(EvalError):
    def __init__(self, name):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class IndexOutOfRange(EvalError):
    def __init__(self, array, index):
        super().__init__(f"index {index} out of range for array {array!r}")
        self.array = array
        self.index = index


class DivisionByZero(EvalError):
    def __init__(self):
        super().__init__("division by zero")


class VectorAsScalar(EvalError):
    def __init__(self, ref):
        super().__init__(f"vector segment {ref} used as a scalar but has length != 1")
        self.ref = ref


class UnresolvedSegment(EvalError):
    def __init__(self, ref):
        super().__init__(f"no cursor information to resolve segment {ref}")
        self.ref = ref


class NormalizeBudgetExceeded(FlamesmithError):
    """Internal error: the rewrite engine did not reach a fixpoint in budget."""


class InputError(FlamesmithError):
    """Bad spec or worksheet text supplied by the user."""


class ParseError(InputError):
    def __init__(self, line, column, expected, found=None):
        detail = f"line {line}, column {column}: expected {expected}"
        if found is not None:
            detail += f", found {found!r}"
        super().__init__(detail)
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found


class SemanticError(InputError):
    pass


class WorksheetFormatError(InputError):
    pass


class DerivationError(FlamesmithError):
    """A worksheet step could not be synthesized."""


class UnsplittableForm(DerivationError):
    pass


class NoGuardFound(DerivationError):
    pass


class NoInitFound(DerivationError):
    pass


class NoTemplateMatch(DerivationError):
    """The update hole was solved but matches no update template.

    Carries both normalized states so the gap is diagnosable.
    """

    def __init__(self, message, before=None, after=None):
        super().__init__(message)
        self.before = before
        self.after = after


class UnsupportedStatement(DerivationError):
    pass


class TargetAbsent(DerivationError):
    pass


class UnsupportedRecurrence(DerivationError):
    pass


class IncompleteWorksheet(FlamesmithError):
    pass


class VacuousPrecondition(FlamesmithError):
    def __init__(self, draws):
        super().__init__(f"no state satisfying the precondition found in {draws} draws")
        self.draws = draws


class NonTermination(FlamesmithError):
    def __init__(self, cap):
        super().__init__(f"loop exceeded the iteration cap of {cap}")
        self.cap = cap


class InvariantViolation(FlamesmithError):
    def __init__(self, iteration, site, state):
        super().__init__(f"invariant violated at iteration {iteration} ({site})")
        self.iteration = iteration
        self.site = site
        self.state = state


class CostInvariantFalsified(FlamesmithError):
    def __init__(self, counterexample):
        super().__init__("cost invariant falsified")
        self.counterexample = counterexample
