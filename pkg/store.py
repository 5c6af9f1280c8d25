#!/usr/bin/python3
import hashlib
import json
import logging
import os
from typing import Optional

import numpy as np
import peewee

from continuation import Branch, BranchEvent
from discretize import SolutionPoint

l = logging.getLogger(__name__)

# store.py - Catalogue of traced branches in an SQLite database, so identical runs are not traced twice.
# Copyright (C) 2019 Danya Generalov (https://github.com/danya02)
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

db = peewee.SqliteDatabase(None, pragmas={
    'journal_mode': 'wal',
    'cache_size': -1024 * 1024})


class BaseModel(peewee.Model):
    class Meta:
        database = db


class BranchRun(BaseModel):
    fingerprint = peewee.CharField(unique=True)
    k = peewee.IntegerField()
    direction = peewee.IntegerField()
    settings = peewee.TextField()


class BranchPointRow(BaseModel):
    run = peewee.ForeignKeyField(BranchRun, backref='points', on_delete='CASCADE')
    position = peewee.IntegerField()
    lam = peewee.DoubleField()
    s_coord = peewee.DoubleField()
    nodal_count = peewee.IntegerField()
    sigma_min = peewee.DoubleField()
    u_min = peewee.DoubleField()
    arclength = peewee.DoubleField()
    dphi_left = peewee.DoubleField()
    dphi_right = peewee.DoubleField()
    residual_norm = peewee.DoubleField()
    n_positive = peewee.IntegerField()
    phi = peewee.TextField()


class BranchEventRow(BaseModel):
    run = peewee.ForeignKeyField(BranchRun, backref='events', on_delete='CASCADE')
    position = peewee.IntegerField()
    kind = peewee.CharField()


POINT_FIELDS = ('lam', 's_coord', 'nodal_count', 'sigma_min', 'u_min', 'arclength', 'dphi_left', 'dphi_right',
                'residual_norm', 'n_positive')


def fingerprint(**settings) -> str:
    """Stable digest of the settings that determine a branch."""
    text = json.dumps({key: repr(value) for key, value in sorted(settings.items())}, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


class BranchStore:
    def __init__(self, path: str):
        """Open (creating if needed) the branch catalogue at 'path'."""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.path = path
        db.init(path)
        db.create_tables([BranchRun, BranchPointRow, BranchEventRow])
        l.debug('Branch store opened at %s', path)

    def save_branch(self, key: str, branch: Branch, settings: Optional[dict] = None):
        with db.atomic():
            old = BranchRun.get_or_none(fingerprint=key)
            if old is not None:
                l.info('Replacing cached branch %s', key[:12])
                BranchPointRow.delete().where(BranchPointRow.run == old).execute()
                BranchEventRow.delete().where(BranchEventRow.run == old).execute()
                old.delete_instance()
            run = BranchRun.create(fingerprint=key, k=branch.k, direction=branch.direction,
                                   settings=json.dumps(settings or {}, sort_keys=True, default=repr))
            for i, point in enumerate(branch.points):
                row = {name: getattr(point, name) for name in POINT_FIELDS}
                BranchPointRow.create(run=run, position=i, phi=json.dumps([repr(float(v)) for v in point.phi]), **row)
            for event in branch.events:
                BranchEventRow.create(run=run, position=event.index, kind=event.kind)
        l.info('Stored branch k=%d dir=%+d (%d points) as %s', branch.k, branch.direction, len(branch.points),
               key[:12])

    def load_branch(self, key: str) -> Optional[Branch]:
        run = BranchRun.get_or_none(fingerprint=key)
        if run is None:
            l.info('Cache miss for branch %s', key[:12])
            return None
        branch = Branch(run.k, run.direction)
        try:
            for row in run.points.order_by(BranchPointRow.position):
                phi = np.array([float(v) for v in json.loads(row.phi)])
                branch.points.append(SolutionPoint(phi=phi, **{name: getattr(row, name) for name in POINT_FIELDS}))
        except (ValueError, TypeError) as e:
            l.warning('Cached branch %s is unreadable (%s), ignoring it', key[:12], e)
            return None
        for row in run.events.order_by(BranchEventRow.id):
            branch.events.append(BranchEvent(row.position, row.kind))
        l.info('Loaded cached branch k=%d dir=%+d (%d points)', branch.k, branch.direction, len(branch.points))
        return branch

    def count(self) -> int:
        return BranchRun.select().count()

    def close(self):
        db.close()
