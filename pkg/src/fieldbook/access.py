"""Sharing roles, grants, and submit-only form tokens.

The permission matrix is cumulative: each role allows everything weaker roles
allow. Form tokens are not principals; they authorize render and submit on
exactly one form and nothing else, so a leaked form link never exposes the
grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import NotFoundError, PermissionDenied, ValidationError
from .ids import new_secret_token


class Role(str, Enum):
    OWNER = "owner"
    EDITOR = "editor"
    COMMENTER = "commenter"
    READONLY = "readonly"


ROLE_ORDER = {Role.READONLY: 0, Role.COMMENTER: 1, Role.EDITOR: 2, Role.OWNER: 3}

ACTIONS = (
    "read-grid",
    "comment",
    "create-record",
    "edit-record",
    "delete-record",
    "edit-schema",
    "edit-form",
    "manage-grants",
    "export",
    "render-form",
    "submit-form",
)

_READONLY = frozenset({"read-grid", "export"})
_COMMENTER = _READONLY | {"comment"}
_EDITOR = _COMMENTER | {"create-record", "edit-record", "delete-record", "render-form", "submit-form"}
_OWNER = frozenset(ACTIONS)

ROLE_ACTIONS: dict[Role, frozenset[str]] = {
    Role.READONLY: _READONLY,
    Role.COMMENTER: frozenset(_COMMENTER),
    Role.EDITOR: frozenset(_EDITOR),
    Role.OWNER: _OWNER,
}

TOKEN_ACTIONS = frozenset({"render-form", "submit-form"})

# Token administration sits outside the grid matrix: owners and editors may
# mint and revoke submit links for forms they can already submit to.
TOKEN_ADMIN_ROLES = frozenset({Role.OWNER, Role.EDITOR})


@dataclass
class Grant:
    principal_id: str
    role: Role


@dataclass
class FormToken:
    token: str
    form_id: str
    revoked: bool = False


@dataclass(frozen=True)
class Actor:
    """Either an authenticated principal or a bearer of a form token."""

    principal_id: str | None = None
    form_token: FormToken | None = None

    @property
    def is_token(self) -> bool:
        return self.form_token is not None


def grant_for(grants: list[Grant], principal_id: str) -> Grant | None:
    for g in grants:
        if g.principal_id == principal_id:
            return g
    return None


def role_allows(role: Role, action: str) -> bool:
    return action in ROLE_ACTIONS[role]


def authorize(actor: Actor, action: str, grants: list[Grant], form_id: str | None = None) -> bool:
    """Pure decision; deny is a value, never an exception."""
    if actor.is_token:
        tok = actor.form_token
        return (
            action in TOKEN_ACTIONS
            and not tok.revoked
            and form_id is not None
            and tok.form_id == form_id
        )
    grant = grant_for(grants, actor.principal_id)
    if grant is None:
        return False
    return role_allows(grant.role, action)


def require(actor: Actor, action: str, grants: list[Grant], form_id: str | None = None) -> None:
    if not authorize(actor, action, grants, form_id=form_id):
        raise PermissionDenied(f"action '{action}' denied")


def set_grant(grants: list[Grant], principal_id: str, role: Role) -> Grant:
    """Replace or add the grant for one principal (at most one per principal)."""
    existing = grant_for(grants, principal_id)
    if existing is not None:
        if existing.role == Role.OWNER and role != Role.OWNER:
            _check_not_last_owner(grants, principal_id)
        existing.role = role
        return existing
    grant = Grant(principal_id=principal_id, role=role)
    grants.append(grant)
    return grant


def revoke_grant(grants: list[Grant], principal_id: str) -> None:
    existing = grant_for(grants, principal_id)
    if existing is None:
        raise NotFoundError("unknown-principal", f"no grant for {principal_id!r}")
    if existing.role == Role.OWNER:
        _check_not_last_owner(grants, principal_id)
    grants.remove(existing)


def _check_not_last_owner(grants: list[Grant], principal_id: str) -> None:
    owners = [g for g in grants if g.role == Role.OWNER]
    if len(owners) == 1 and owners[0].principal_id == principal_id:
        raise ValidationError("last-owner-removal", "a base must keep at least one owner")


def mint_form_token(form_id: str) -> FormToken:
    return FormToken(token=new_secret_token(), form_id=form_id)


def parse_role(value: str) -> Role:
    try:
        return Role(value)
    except ValueError:
        raise ValidationError("unknown-role", f"unknown role {value!r}") from None
