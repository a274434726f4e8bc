"""create run_records

Revision ID: 0001
Revises:
Create Date: 2026-03-01 09:00:00
"""
from alembic import op
import sqlalchemy as sa

revision = "0001"
down_revision = None
branch_labels = None
depends_on = None


def upgrade() -> None:
    op.create_table(
        "run_records",
        sa.Column("id", sa.Integer(), primary_key=True),
        sa.Column("command", sa.String(length=32), nullable=False),
        sa.Column("status", sa.Enum("SUCCEEDED", "FAILED", name="runstatus"), nullable=False),
        sa.Column("specJson", sa.Text(), nullable=False),
        sa.Column("summaryJson", sa.Text(), nullable=True),
        sa.Column("outputPath", sa.String(length=1024), nullable=True),
        sa.Column("durationSeconds", sa.Float(), nullable=True),
        sa.Column("createdAt", sa.TIMESTAMP(timezone=True), server_default=sa.func.now(), nullable=False),
    )
    op.create_index("ix_run_records_id", "run_records", ["id"])
    op.create_index("ix_run_records_command", "run_records", ["command"])


def downgrade() -> None:
    op.drop_index("ix_run_records_command", table_name="run_records")
    op.drop_index("ix_run_records_id", table_name="run_records")
    op.drop_table("run_records")
    sa.Enum(name="runstatus").drop(op.get_bind(), checkfirst=True)
