import inspect
import json


def _arguments(obj) -> list:

    code = obj.__init__.__code__
    arguments = inspect.getargs(code).args

    arguments.remove("self")

    return arguments


def _plain(value):

    if isinstance(value, List):
        return [_plain(item) for item in value.base_list]

    if isinstance(value, Dict):
        return {key: _plain(item) for key, item in value}

    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}

    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]

    # numpy scalars, arrays and autodiff tensors
    if hasattr(value, "tolist"):
        return value.tolist()

    return value


class MetaClass(type):

    def __str__(self):
        return f"<class 'npas.types.{self.__name__}'>"


class BaseClass(metaclass=MetaClass):


    def __str__(self):

        return json.dumps(
            _plain(self),
            indent=4,
            ensure_ascii=False
        )


class Dict(BaseClass):
    """
    Record whose fields are the arguments of its __init__.

    Iterating yields (field, value) pairs, so dict(record) works, and str(record)
    renders the record as JSON.
    """


    def __iter__(self):

        for argument in _arguments(self):
            yield argument, getattr(self, argument)


    def __getitem__(self, item):
        return getattr(self, item)


    def __setitem__(self, key, value):
        setattr(self, key, value)


    def __eq__(self, other):

        if type(self) is not type(other):
            return NotImplemented

        return _plain(self) == _plain(other)


    def __repr__(self):

        data = []

        for argument in _arguments(self):

            attribute = getattr(self, argument)

            if isinstance(attribute, List):
                data.append(f"{argument}={attribute.__class__.__name__}({repr(attribute.base_list)})")
            else:
                data.append(f"{argument}={repr(attribute)}")

        class_name = self.__class__.__name__
        representation = ", ".join(data)

        return f"npas.types.{class_name}({representation})"


    def to_dict(self) -> dict:
        return _plain(self)


class List(BaseClass):


    def __init__(self, base_list=None):

        if base_list is None:
            self.base_list = []
        else:
            self.base_list = list(base_list)


    def __iter__(self):
        return iter(self.base_list)


    def __getitem__(self, item):
        return self.base_list[item]


    def __len__(self):
        return len(self.base_list)


    def __eq__(self, other):

        if type(self) is not type(other):
            return NotImplemented

        return _plain(self) == _plain(other)


    def append(self, item):
        self.base_list.append(item)


    def list(self):
        return list(self.base_list)


    def __repr__(self):

        class_name = self.__class__.__name__
        representation = repr(self.base_list)

        return f"npas.types.{class_name}({representation})"
