from sqlalchemy import Column, ForeignKey, Integer, String, Text, DateTime
from sqlalchemy.orm import relationship
from sqlalchemy.sql import func

from app.database import Base


class EntityRow(Base):
    """
    Canonical document of one registry entity
    """
    __tablename__ = "entities"

    pid = Column(String(255), primary_key=True, index=True)
    entity_type = Column(String(50), nullable=False, index=True)
    document = Column(Text, nullable=False)  # canonical interchange text
    version = Column(Integer, nullable=False, default=1)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    updated_at = Column(DateTime(timezone=True), onupdate=func.now())

    # Relationships
    edges = relationship(
        "EdgeRow",
        back_populates="source",
        cascade="all, delete-orphan",
        order_by="EdgeRow.position",
    )

    def __repr__(self):
        return f"<EntityRow(pid='{self.pid}', type='{self.entity_type}', version={self.version})>"


class EdgeRow(Base):
    """
    Labeled reference derived from an entity's fields
    """
    __tablename__ = "edges"

    id = Column(Integer, primary_key=True, index=True)
    from_pid = Column(String(255), ForeignKey("entities.pid", ondelete="CASCADE"), nullable=False, index=True)
    label = Column(String(50), nullable=False)
    to_pid = Column(String(255), nullable=False, index=True)  # adapter Pids have no entity row
    position = Column(Integer, nullable=False)

    # Relationships
    source = relationship("EntityRow", back_populates="edges")

    def __repr__(self):
        return f"<EdgeRow({self.from_pid} -{self.label}-> {self.to_pid})>"
