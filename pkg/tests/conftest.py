import pytest

from csr.catalog import load_catalog
from csr.similarity import SimilarityConfig

# Hand-written retail schema used across the suite. Primary keys follow the
# <table-singular>_id convention; "name" and "price" deliberately appear in
# several tables to exercise ambiguous-column handling.
SHOP_DOCUMENT = {
    "tables": [
        {
            "name": "regions",
            "description": "Sales regions",
            "columns": [
                {"name": "region_id", "primary_key": True},
                {"name": "name", "description": "Region display name"},
            ],
        },
        {
            "name": "customers",
            "description": "Registered customers",
            "columns": [
                {"name": "customer_id", "primary_key": True},
                {"name": "name"},
                {"name": "email", "description": "Contact email"},
                {"name": "region_id", "description": "Home region"},
            ],
            "foreign_keys": [
                {"column": "region_id", "ref_table": "regions", "ref_column": "region_id"}
            ],
        },
        {
            "name": "products",
            "description": "Catalog of sellable products",
            "columns": [
                {"name": "product_id", "primary_key": True},
                {"name": "name"},
                {"name": "category"},
                {"name": "price", "description": "Unit list price"},
            ],
        },
        {
            "name": "orders",
            "description": "Customer orders",
            "columns": [
                {"name": "order_id", "primary_key": True},
                {"name": "customer_id", "description": "Ordering customer"},
                {"name": "total"},
                {"name": "placed_at"},
                {"name": "status"},
            ],
            "foreign_keys": [
                {
                    "column": "customer_id",
                    "ref_table": "customers",
                    "ref_column": "customer_id",
                }
            ],
        },
        {
            "name": "order_items",
            "columns": [
                {"name": "item_id", "primary_key": True},
                {"name": "order_id"},
                {"name": "product_id"},
                {"name": "quantity"},
                {"name": "price"},
            ],
            "foreign_keys": [
                {"column": "order_id", "ref_table": "orders", "ref_column": "order_id"},
                {
                    "column": "product_id",
                    "ref_table": "products",
                    "ref_column": "product_id",
                },
            ],
        },
        {
            "name": "shipments",
            "description": "Outbound shipments",
            "columns": [
                {"name": "shipment_id", "primary_key": True},
                {"name": "order_id"},
                {"name": "carrier"},
                {"name": "shipped_at"},
            ],
            "foreign_keys": [
                {"column": "order_id", "ref_table": "orders", "ref_column": "order_id"}
            ],
        },
    ]
}

SHOP_TRACE = [
    {
        "question": "list customer names with their order totals",
        "sql": "SELECT c.name, o.total FROM customers c "
        "JOIN orders o ON c.customer_id = o.customer_id",
    },
    {
        "question": "how many orders are still open",
        "sql": "SELECT COUNT(*) FROM orders WHERE status = 'open'",
    },
    {
        "question": "which products were ordered in quantity",
        "sql": "SELECT p.name, oi.quantity FROM order_items oi "
        "JOIN products p ON p.product_id = oi.product_id",
    },
    {
        "question": "shipment carriers for recent orders",
        "sql": "SELECT s.carrier FROM shipments s "
        "JOIN orders o ON s.order_id = o.order_id WHERE o.placed_at > '2024-01-01'",
    },
    {
        "question": "customer emails in the west region",
        "sql": "SELECT c.email FROM customers c "
        "JOIN regions r ON c.region_id = r.region_id WHERE r.name = 'West'",
    },
]


@pytest.fixture(scope="session")
def shop_catalog():
    return load_catalog(SHOP_DOCUMENT)


@pytest.fixture(scope="session")
def small_config():
    # 128 dimensions keeps randomized suites fast; quality tests that care
    # about collision rates pick their own dimension.
    return SimilarityConfig(dimension=128)
