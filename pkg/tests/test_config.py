import pytest

from conftest import CONFIGS
from fogsim.config import ConfigFileError, dump_config, load_config, parse_config
from fogsim.errors import ConfigError
from fogsim.experiments import rescue_preset
from fogsim.model import Role
from fogsim.routing import CaseA, CaseB, CaseC, CloudOnly

ARCH_A = (CONFIGS / "arch_a.example").read_text()


def test_arch_a_fixture():
    sc = parse_config(ARCH_A)
    assert isinstance(sc.policy, CaseA)
    assert sum(n.role is Role.FRS for n in sc.nodes) == 1
    assert sc.seed == 2020


@pytest.mark.parametrize("name,policy", [
    ("arch_a", CaseA), ("arch_b", CaseB), ("arch_c", CaseC), ("cloud_sydney", CloudOnly), ("rescue", CaseC),
])
def test_every_fixture_loads(name, policy):
    assert isinstance(load_config(CONFIGS / f"{name}.example").policy, policy)


def test_unknown_link_endpoint_is_named():
    text = ARCH_A + '\n[[links]]\na = "r1"\nb = "ghost"\none_way = { constant = 1.0 }\n'
    with pytest.raises(ConfigFileError) as info:
        parse_config(text)
    assert "ghost" in str(info.value)


def test_missing_seed():
    with pytest.raises(ConfigFileError) as info:
        parse_config(ARCH_A.replace("seed = 2020\n", ""))
    assert [i.field for i in info.value.issues] == ["seed"]


def test_all_errors_collected():
    text = ARCH_A.replace("seed = 2020\n", "").replace('kind = "A"', 'kind = "Z"')
    with pytest.raises(ConfigFileError) as info:
        parse_config(text)
    assert {i.field for i in info.value.issues} >= {"seed", "policy.kind"}


def test_syntax_error_reports_line():
    with pytest.raises(ConfigFileError) as info:
        parse_config('seed = 1\nname = "x"\nbroken = \n')
    assert info.value.issues[0].line == 3
    assert isinstance(info.value, ConfigError)


def test_round_trip_is_idempotent():
    once = parse_config(ARCH_A)
    assert parse_config(dump_config(once)) == once


def test_rescue_round_trip():
    sc = rescue_preset()
    assert parse_config(dump_config(sc)) == sc
    forced = rescue_preset(force_cloud="SaoPaulo")
    assert parse_config(dump_config(forced)) == forced
