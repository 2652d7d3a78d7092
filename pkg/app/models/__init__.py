from .envelope_model import EnvelopeKind, ScalarEnvelope, constant
from .kernel_model import (
    DecayEnvelope,
    DecayKind,
    DichotomyData,
    GrowthConstants,
    KernelSpec,
    TrichotomyData,
)
from .system_model import CatalogEntry, CoupledSystem, ParameterSpec
from .table_model import ConjugacyPair, FunctionTable, GridSpec, SolverInfo
from .example_model import ExamplePackage, ExpectedCheck
