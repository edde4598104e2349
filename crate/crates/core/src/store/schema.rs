/// Bumped whenever the DDL below changes shape.
pub const SCHEMA_VERSION: i64 = 1;

pub const DDL: &str = r#"
CREATE TABLE IF NOT EXISTS schema_meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS dependency_groups (
    id        INTEGER PRIMARY KEY,
    ecosystem TEXT NOT NULL,
    name      TEXT NOT NULL,
    UNIQUE (ecosystem, name)
);

CREATE TABLE IF NOT EXISTS categories (
    id          INTEGER PRIMARY KEY,
    name        TEXT NOT NULL UNIQUE CHECK (length(name) > 0),
    description TEXT
);

CREATE TABLE IF NOT EXISTS dependencies (
    id                      INTEGER PRIMARY KEY,
    ecosystem               TEXT NOT NULL,
    group_id                INTEGER NOT NULL REFERENCES dependency_groups(id),
    name                    TEXT NOT NULL,
    category_id             INTEGER REFERENCES categories(id),
    latest_notified_version TEXT,
    UNIQUE (ecosystem, group_id, name)
);

CREATE TABLE IF NOT EXISTS dependency_versions (
    id               INTEGER PRIMARY KEY,
    dependency_id    INTEGER NOT NULL REFERENCES dependencies(id),
    version          TEXT NOT NULL,
    introduced_date  TEXT NOT NULL,
    status           TEXT NOT NULL,
    effective_date   TEXT NOT NULL,
    end_date         TEXT,
    justification    TEXT,
    blacklist_reason TEXT,
    UNIQUE (dependency_id, version)
);

CREATE TABLE IF NOT EXISTS applications (
    id   INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE
);

CREATE TABLE IF NOT EXISTS application_dependencies (
    application_id        INTEGER NOT NULL REFERENCES applications(id),
    dependency_version_id INTEGER NOT NULL REFERENCES dependency_versions(id),
    first_seen            TEXT NOT NULL,
    last_seen             TEXT NOT NULL,
    first_seen_commit     TEXT NOT NULL,
    PRIMARY KEY (application_id, dependency_version_id)
);

CREATE TABLE IF NOT EXISTS vulnerabilities (
    id              TEXT PRIMARY KEY,
    source          TEXT NOT NULL,
    severity_tenths INTEGER NOT NULL,
    summary         TEXT NOT NULL,
    published       TEXT NOT NULL,
    matches_json    TEXT NOT NULL,
    recorded_at     TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS vulnerability_links (
    dependency_version_id INTEGER NOT NULL REFERENCES dependency_versions(id),
    advisory_id           TEXT NOT NULL REFERENCES vulnerabilities(id),
    linked_at             TEXT NOT NULL,
    withdrawn_at          TEXT,
    PRIMARY KEY (dependency_version_id, advisory_id)
);

CREATE TABLE IF NOT EXISTS unmatched_advisories (
    id          TEXT PRIMARY KEY,
    source      TEXT NOT NULL,
    product_key TEXT NOT NULL,
    summary     TEXT NOT NULL,
    recorded_at TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS waivers (
    id                    INTEGER PRIMARY KEY,
    application_id        INTEGER NOT NULL REFERENCES applications(id),
    dependency_version_id INTEGER NOT NULL REFERENCES dependency_versions(id),
    expires               TEXT NOT NULL,
    justification         TEXT NOT NULL CHECK (length(justification) > 0),
    approver              TEXT NOT NULL,
    granted_at            TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS events (
    seq     INTEGER PRIMARY KEY,
    at      TEXT NOT NULL,
    stream  TEXT NOT NULL,
    kind    TEXT NOT NULL,
    actor   TEXT,
    subject TEXT NOT NULL,
    detail  TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS sbom_snapshots (
    id             INTEGER PRIMARY KEY,
    application_id INTEGER NOT NULL REFERENCES applications(id),
    commit_id      TEXT NOT NULL,
    captured_at    TEXT NOT NULL,
    body           TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS gate_decisions (
    id             INTEGER PRIMARY KEY,
    application_id INTEGER NOT NULL REFERENCES applications(id),
    commit_id      TEXT NOT NULL,
    evaluated_at   TEXT NOT NULL,
    verdict        TEXT NOT NULL,
    body           TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS leases (
    name        TEXT PRIMARY KEY,
    holder      TEXT NOT NULL,
    acquired_at TEXT NOT NULL,
    expires_at  TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS webhook_deliveries (
    id         INTEGER PRIMARY KEY,
    event_seq  INTEGER NOT NULL,
    url        TEXT NOT NULL,
    status     TEXT NOT NULL,
    attempts   INTEGER NOT NULL,
    last_error TEXT,
    at         TEXT NOT NULL
);
"#;
