"""Market/schedule configuration files.

YAML key-value schema, versioned by ``schema_version`` (currently 1); the
full field reference lives in docs/config_schema.md.  The covariance may be
given directly or assembled from volatilities and a correlation (scalar for
two assets, else a full matrix).
"""

from __future__ import annotations

import numpy as np
import yaml

from .errors import ConfigError
from .market import ContributionSchedule, MarketParams, validate_market

SCHEMA_VERSION = 1


def load_market_config(path):
    """Read (MarketParams, ContributionSchedule) from a YAML config file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        market = _parse_market(raw["market"])
        schedule = _parse_schedule(raw["schedule"])
    except KeyError as exc:
        raise ConfigError(f"missing config section {exc}") from exc
    return market, schedule


def _parse_market(section) -> MarketParams:
    if "covariance" in section:
        params = MarketParams(
            rate_riskfree=section["rate_riskfree"],
            drifts=section["drifts"],
            covariance=section["covariance"],
        )
    elif "volatilities" in section:
        corr = section.get("correlation", 0.0)
        vols = np.asarray(section["volatilities"], dtype=float)
        if np.isscalar(corr) or np.ndim(corr) == 0:
            if vols.size != 2:
                raise ConfigError("scalar correlation only supported for two assets")
            corr = [[1.0, float(corr)], [float(corr), 1.0]]
        params = MarketParams.from_volatilities(
            rate_riskfree=section["rate_riskfree"],
            drifts=section["drifts"],
            volatilities=vols,
            correlation=corr,
        )
    else:
        raise ConfigError("market needs either 'covariance' or 'volatilities'")
    try:
        return validate_market(params)
    except Exception as exc:
        raise ConfigError(f"invalid market: {exc}") from exc


def _parse_schedule(section) -> ContributionSchedule:
    try:
        if "breakpoints" in section:
            return ContributionSchedule(breakpoints=section["breakpoints"],
                                        rates=section["rates"])
        return ContributionSchedule.constant(horizon=section["horizon"],
                                             total=section.get("total", 1.0))
    except Exception as exc:
        raise ConfigError(f"invalid schedule: {exc}") from exc
