import pydantic


class BaseModel(pydantic.BaseModel):
    class Config:
        allow_mutation = False
        extra = pydantic.Extra.forbid
        underscore_attrs_are_private = True
