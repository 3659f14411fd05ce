"""Compliance checking of data-usage policies against consent and GDPR rules."""
import logging

from .engine import ComplianceReport, Failure, check_compliance, complies
from .gdpr import RegulatoryRulebook, builtin_gdpr_rulebook, check_regulatory, load_rulebook
from .ledger import Ledger
from .normalizer import normalize_full, normalize_simple
from .policy import FullPolicy, SimplePolicy, parse_policy, serialize_policy
from .vocab import VocabularyOntology, load_vocabulary, load_vocabulary_file

__all__ = [
    "ComplianceReport", "Failure", "FullPolicy", "Ledger", "RegulatoryRulebook", "SimplePolicy",
    "VocabularyOntology", "builtin_gdpr_rulebook", "check_compliance", "check_regulatory", "complies",
    "load_rulebook", "load_vocabulary", "load_vocabulary_file", "normalize_full", "normalize_simple",
    "parse_policy", "serialize_policy",
]
__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
