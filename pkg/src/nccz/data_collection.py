"""
nccz/data_collection.py

Column tables filled row by row while a suite runs, later emitted as CSV.
"""
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

SCHEMA_VERSION = 1


class DataCollector:
    """Tables of named columns, one per sweep or per-member measurement"""

    __slots__ = "tables", "descriptions"

    def __init__(self, tables: Optional[Dict[str, Tuple[str, ...]]] = None) -> None:
        self.tables: Dict[str, Dict[str, List[Any]]] = {}
        self.descriptions: Dict[str, str] = {}

        if tables:
            for table_name, column_names in tables.items():
                self.create_new_table(table_name, column_names)

    def create_new_table(
        self, table_name: str, column_names: Tuple[str, ...], description: str = ""
    ) -> None:
        """Create a new table for data collection

        Parameters
        ----------
        table_name: str
            The name of the new table; it becomes the CSV file name
        column_names: Tuple[str, ...]
            The names of columns within the table
        description: str
            One line written into the CSV header
        """
        if len(set(column_names)) != len(column_names):
            raise ValueError(f"Table {table_name} has repeated column names")
        self.tables[table_name] = {column: [] for column in column_names}
        self.descriptions[table_name] = description

    def add_table_row(self, table_name: str, row_data: Dict[str, Any]) -> None:
        """Add a new row of data to a table

        Raises
        ------
        KeyError
            If the table does not exist
        ValueError
            If row_data misses one of the table's columns
        """
        if table_name not in self.tables:
            raise KeyError(f"Could not find table with name: {table_name}")

        table = self.tables[table_name]
        missing = [column for column in table if column not in row_data]
        if missing:
            raise ValueError(f"Row data is missing columns: {', '.join(missing)}")

        for column in table:
            table[column].append(row_data[column])

    def num_rows(self, table_name: str) -> int:
        columns = self.tables[table_name]
        return len(next(iter(columns.values()), []))

    def table_names(self) -> List[str]:
        return list(self.tables)

    def get_table_dataframe(self, table_name: str) -> pd.DataFrame:
        """Create a pandas data frame from a table

        Raises
        ------
        KeyError
            If no table is found with the given name
        """
        return pd.DataFrame(self.tables[table_name], columns=list(self.tables[table_name]))
