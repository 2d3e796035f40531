"""Choice-data schema, validation, and delimited-text ingestion.

A dataset couples a long-format choice file (one row per respondent x task x
alternative) with a wide respondent file (socio-demographics plus Likert
indicator responses keyed by respondent id). Datasets are immutable after
loading and safe to share across parallel workers.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

LIKERT_MIN = 1
LIKERT_MAX = 5


class DatasetError(ValueError):
    """Raised when a choice dataset violates its schema."""


@dataclass(frozen=True)
class ColumnMap:
    """Names of the bookkeeping columns in the long-format choice file."""

    respondent: str = "respondent_id"
    task: str = "task_id"
    alternative: str = "alternative"
    available: str = "available"
    chosen: str = "chosen"

    def special(self):
        return (self.respondent, self.task, self.alternative,
                self.available, self.chosen)


@dataclass(frozen=True)
class Alternative:
    id: int
    label: str
    is_base: bool = False


@dataclass(frozen=True)
class ChoiceTask:
    respondent_id: int
    task_id: int
    attributes: np.ndarray      # (J, K) float
    availability: np.ndarray    # (J,) bool
    chosen: int                 # alternative id


@dataclass(frozen=True)
class Respondent:
    id: int
    sociodemographics: dict
    indicators: dict
    tasks: tuple


@dataclass(frozen=True)
class ChoiceDataset:
    alternatives: tuple
    respondents: tuple
    attribute_names: tuple
    indicator_names: tuple
    sociodemo_names: tuple

    @property
    def n_alternatives(self):
        return len(self.alternatives)

    @property
    def n_tasks(self):
        return sum(len(r.tasks) for r in self.respondents)

    @property
    def base_id(self):
        for alt in self.alternatives:
            if alt.is_base:
                return alt.id
        raise DatasetError("no base alternative defined")

    def alternative_labels(self):
        return tuple(a.label for a in self.alternatives)

    def tasks(self):
        for resp in self.respondents:
            yield from resp.tasks


def validate_dataset(ds):
    """Check every schema invariant; raises DatasetError on the first breach."""
    J = len(ds.alternatives)
    if J < 2:
        raise DatasetError("need at least 2 alternatives")
    if sorted(a.id for a in ds.alternatives) != list(range(J)):
        raise DatasetError("alternative ids must be dense 0..J-1")
    if sum(a.is_base for a in ds.alternatives) != 1:
        raise DatasetError("exactly one alternative must be the base")
    seen = set()
    for resp in ds.respondents:
        if resp.id in seen:
            raise DatasetError(f"duplicate respondent id {resp.id}")
        seen.add(resp.id)
        if set(resp.sociodemographics) != set(ds.sociodemo_names):
            raise DatasetError(f"respondent {resp.id}: socio-demographic names mismatch")
        if set(resp.indicators) != set(ds.indicator_names):
            raise DatasetError(f"respondent {resp.id}: indicator names mismatch")
        for name, value in resp.indicators.items():
            if not (LIKERT_MIN <= value <= LIKERT_MAX) or int(value) != value:
                raise DatasetError(
                    f"respondent {resp.id}: Likert out of range for {name}: {value}")
        for task in resp.tasks:
            if task.respondent_id != resp.id:
                raise DatasetError(
                    f"task {task.task_id} does not reference respondent {resp.id}")
            if task.attributes.shape != (J, len(ds.attribute_names)):
                raise DatasetError(
                    f"respondent {resp.id} task {task.task_id}: attribute matrix shape "
                    f"{task.attributes.shape} != ({J}, {len(ds.attribute_names)})")
            if not np.all(np.isfinite(task.attributes)):
                raise DatasetError(
                    f"respondent {resp.id} task {task.task_id}: non-finite attribute")
            if task.availability.shape != (J,):
                raise DatasetError(
                    f"respondent {resp.id} task {task.task_id}: availability length")
            if task.availability.sum() < 2:
                raise DatasetError(
                    f"respondent {resp.id} task {task.task_id}: fewer than 2 "
                    "available alternatives")
            if not (0 <= task.chosen < J):
                raise DatasetError(
                    f"respondent {resp.id} task {task.task_id}: chosen id {task.chosen} "
                    "out of range")
            if not task.availability[task.chosen]:
                raise DatasetError(
                    f"respondent {resp.id} task {task.task_id}: chosen alternative "
                    f"'{ds.alternatives[task.chosen].label}' is not available")
    return ds


def load_dataset(choices_path, respondents_path, indicators, base,
                 columns=ColumnMap()):
    """Load and validate a dataset from its two CSV files.

    indicators: names of the Likert columns in the respondent file; every
                other non-id column there is treated as a socio-demographic.
    base:       label of the base alternative.
    """
    choices = pd.read_csv(choices_path, float_precision="round_trip")
    respondents = pd.read_csv(respondents_path, float_precision="round_trip")
    for col in columns.special():
        if col not in choices.columns:
            raise DatasetError(f"{choices_path}: missing column '{col}'")
    if columns.respondent not in respondents.columns:
        raise DatasetError(f"{respondents_path}: missing column '{columns.respondent}'")
    for col in indicators:
        if col not in respondents.columns:
            raise DatasetError(f"{respondents_path}: missing indicator column '{col}'")

    attribute_names = tuple(c for c in choices.columns if c not in columns.special())
    sociodemo_names = tuple(c for c in respondents.columns
                            if c != columns.respondent and c not in indicators)

    labels = list(dict.fromkeys(choices[columns.alternative].astype(str)))
    if base not in labels:
        raise DatasetError(f"base alternative '{base}' not present in data")
    alternatives = tuple(Alternative(i, lab, lab == base)
                         for i, lab in enumerate(labels))
    alt_index = {lab: i for i, lab in enumerate(labels)}
    J = len(labels)

    resp_rows = {}
    for _, row in respondents.iterrows():
        rid = int(row[columns.respondent])
        socio = {c: float(row[c]) for c in sociodemo_names}
        inds = {}
        for c in indicators:
            v = row[c]
            if not np.isfinite(v) or int(v) != v or not (LIKERT_MIN <= v <= LIKERT_MAX):
                raise DatasetError(f"respondent {rid}: Likert out of range for {c}: {v}")
            inds[c] = int(v)
        resp_rows[rid] = (socio, inds)

    resp_tasks = {rid: [] for rid in resp_rows}
    grouped = choices.groupby([columns.respondent, columns.task], sort=True)
    for (rid, tid), rows in grouped:
        rid, tid = int(rid), int(tid)
        if rid not in resp_rows:
            raise DatasetError(f"task {tid}: unknown respondent id {rid}")
        attrs = np.full((J, len(attribute_names)), np.nan)
        avail = np.zeros(J, dtype=bool)
        chosen = -1
        for _, row in rows.iterrows():
            j = alt_index[str(row[columns.alternative])]
            attrs[j] = [row[c] for c in attribute_names]
            avail[j] = bool(row[columns.available])
            if row[columns.chosen]:
                if chosen >= 0:
                    raise DatasetError(
                        f"respondent {rid} task {tid}: more than one chosen row")
                chosen = j
        if chosen < 0:
            raise DatasetError(f"respondent {rid} task {tid}: no chosen alternative")
        attrs[~avail & ~np.isfinite(attrs).all(axis=1)] = 0.0
        resp_tasks[rid].append(ChoiceTask(rid, tid, attrs, avail, chosen))

    respondents_out = tuple(
        Respondent(rid, socio, inds, tuple(resp_tasks[rid]))
        for rid, (socio, inds) in sorted(resp_rows.items()))
    ds = ChoiceDataset(alternatives, respondents_out, attribute_names,
                       tuple(indicators), sociodemo_names)
    return validate_dataset(ds)


def save_dataset(ds, choices_path, respondents_path, columns=ColumnMap()):
    """Write the two CSV files; floats are emitted with round-tripping repr."""
    labels = ds.alternative_labels()
    rows = []
    for task in ds.tasks():
        for j, lab in enumerate(labels):
            row = {columns.respondent: task.respondent_id,
                   columns.task: task.task_id,
                   columns.alternative: lab,
                   columns.available: int(task.availability[j]),
                   columns.chosen: int(task.chosen == j)}
            for k, name in enumerate(ds.attribute_names):
                row[name] = task.attributes[j, k]
            rows.append(row)
    pd.DataFrame(rows).to_csv(choices_path, index=False)

    rrows = []
    for resp in ds.respondents:
        row = {columns.respondent: resp.id}
        row.update({c: resp.sociodemographics[c] for c in ds.sociodemo_names})
        row.update({c: resp.indicators[c] for c in ds.indicator_names})
        rrows.append(row)
    pd.DataFrame(rrows).to_csv(respondents_path, index=False)


@dataclass(frozen=True)
class DatasetSummary:
    n_respondents: int
    n_tasks: int
    n_alternatives: int
    shares: dict                  # alternative label -> chosen share
    indicator_distributions: dict  # name -> (counts per category 1..5)
    indicator_means: dict
    indicator_sds: dict
    sociodemo_means: dict
    sociodemo_sds: dict
    attribute_means: dict
    attribute_sds: dict


def summarize(ds):
    """Counts, mode shares, indicator distributions, and moment tables."""
    if not ds.respondents or ds.n_tasks == 0:
        raise DatasetError("cannot summarize an empty dataset")
    labels = ds.alternative_labels()
    counts = np.zeros(len(labels))
    for task in ds.tasks():
        counts[task.chosen] += 1
    n_tasks = int(counts.sum())
    shares = {lab: counts[j] / n_tasks for j, lab in enumerate(labels)}

    ind_mat = np.array([[r.indicators[c] for c in ds.indicator_names]
                        for r in ds.respondents], dtype=float) \
        if ds.indicator_names else np.zeros((len(ds.respondents), 0))
    distributions, means, sds = {}, {}, {}
    for k, name in enumerate(ds.indicator_names):
        col = ind_mat[:, k]
        distributions[name] = tuple(
            int((col == c).sum()) for c in range(LIKERT_MIN, LIKERT_MAX + 1))
        means[name] = float(col.mean())
        sds[name] = float(col.std(ddof=1)) if len(col) > 1 else 0.0

    socio_means, socio_sds = {}, {}
    for name in ds.sociodemo_names:
        col = np.array([r.sociodemographics[name] for r in ds.respondents])
        socio_means[name] = float(col.mean())
        socio_sds[name] = float(col.std(ddof=1)) if len(col) > 1 else 0.0

    attr_means, attr_sds = {}, {}
    if ds.attribute_names:
        stacked = np.concatenate(
            [t.attributes[t.availability] for t in ds.tasks()], axis=0)
        for k, name in enumerate(ds.attribute_names):
            attr_means[name] = float(stacked[:, k].mean())
            attr_sds[name] = float(stacked[:, k].std(ddof=1)) if len(stacked) > 1 else 0.0

    return DatasetSummary(
        n_respondents=len(ds.respondents), n_tasks=n_tasks,
        n_alternatives=len(labels), shares=shares,
        indicator_distributions=distributions, indicator_means=means,
        indicator_sds=sds, sociodemo_means=socio_means, sociodemo_sds=socio_sds,
        attribute_means=attr_means, attribute_sds=attr_sds)
